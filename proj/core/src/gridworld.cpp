#include "qnrl/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "qnrl/errors.hpp"

namespace qnrl {

const char* action_name(Action a) {
    switch (a) {
        case Action::up: return "up";
        case Action::down: return "down";
        case Action::left: return "left";
        case Action::right: return "right";
    }
    return "?";
}

bool GridWorld::is_obstacle(Cell c) const {
    return std::find(obstacles.begin(), obstacles.end(), c) != obstacles.end();
}

void GridWorld::validate() const {
    if (width <= 0 || height <= 0) throw InvalidInput("GridWorld: width and height must be positive");
    if (!in_bounds(start) || !in_bounds(goal)) throw InvalidInput("GridWorld: start and goal must lie on the grid");
    if (start == goal) throw InvalidInput("GridWorld: start and goal must differ");
    for (const Cell& o : obstacles)
        if (!in_bounds(o)) throw InvalidInput("GridWorld: obstacle outside the grid");
    if (is_obstacle(start) || is_obstacle(goal)) throw InvalidInput("GridWorld: start or goal is an obstacle");
    if (max_episode_steps == 0) throw InvalidInput("GridWorld: max_episode_steps must be positive");
    if (!std::isfinite(step_reward) || !std::isfinite(goal_reward)) throw InvalidInput("GridWorld: rewards must be finite");
}

Cell GridWorld::move(Cell c, Action a) const {
    Cell n = c;
    switch (a) {
        case Action::up: --n.y; break;
        case Action::down: ++n.y; break;
        case Action::left: --n.x; break;
        case Action::right: ++n.x; break;
    }
    return is_free(n) ? n : c;
}

std::vector<Cell> GridWorld::reachable_cells() const {
    std::vector<bool> seen(num_cells(), false);
    std::vector<Cell> out;
    std::queue<Cell> frontier;
    frontier.push(start);
    seen[index(start)] = true;
    while (!frontier.empty()) {
        Cell c = frontier.front();
        frontier.pop();
        out.push_back(c);
        if (c == goal) continue;
        for (Action a : kAllActions) {
            Cell n = move(c, a);
            if (!seen[index(n)]) {
                seen[index(n)] = true;
                frontier.push(n);
            }
        }
    }
    std::sort(out.begin(), out.end(), [this](Cell a, Cell b) { return index(a) < index(b); });
    return out;
}

GridWorld default_gridworld() {
    return parse_grid(
        "S.....\n"
        "..#...\n"
        "..#...\n"
        "....#.\n"
        ".#....\n"
        ".....G\n");
}

GridWorld parse_grid(std::string_view text) {
    GridWorld env;
    std::vector<std::string> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(line);
    }
    if (rows.empty()) throw InvalidInput("grid: no rows");
    env.width = static_cast<int>(rows.front().size());
    env.height = static_cast<int>(rows.size());
    bool have_start = false;
    bool have_goal = false;
    for (int y = 0; y < env.height; ++y) {
        if (static_cast<int>(rows[y].size()) != env.width)
            throw InvalidInput("grid: row " + std::to_string(y) + " has a different width");
        for (int x = 0; x < env.width; ++x) {
            switch (rows[y][x]) {
                case '.': break;
                case '#': env.obstacles.push_back({x, y}); break;
                case 'S':
                    if (have_start) throw InvalidInput("grid: more than one 'S'");
                    env.start = {x, y};
                    have_start = true;
                    break;
                case 'G':
                    if (have_goal) throw InvalidInput("grid: more than one 'G'");
                    env.goal = {x, y};
                    have_goal = true;
                    break;
                default: throw InvalidInput(std::string("grid: unexpected character '") + rows[y][x] + "'");
            }
        }
    }
    if (!have_start || !have_goal) throw InvalidInput("grid: needs exactly one 'S' and one 'G'");
    env.validate();
    return env;
}

GridWorld load_grid_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open grid file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_grid(buf.str());
}

EnvState env_reset(const GridWorld& env) { return EnvState{env.start, 0, false}; }

StepOutcome env_step(const GridWorld& env, const EnvState& state, Action action) {
    if (state.terminal) throw InvalidTransition("env_step: episode already terminated");
    if (!env.is_free(state.pos)) throw InvalidTransition("env_step: state is not a free cell");
    EnvState next{env.move(state.pos, action), state.steps + 1, false};
    const bool reached = next.pos == env.goal;
    const double reward = reached ? env.goal_reward : env.step_reward;
    next.terminal = reached || next.steps >= env.max_episode_steps;
    return {next, reward, next.terminal};
}

std::vector<double> features(const GridWorld& env, Cell c) {
    if (!env.in_bounds(c)) throw InvalidInput("features: cell outside the grid");
    std::vector<double> f(env.num_cells(), 0.0);
    f[env.index(c)] = 1.0;
    return f;
}

TabularQ::TabularQ(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, 0.0) {}

double TabularQ::max_value(std::size_t s) const {
    double m = (*this)(s, 0);
    for (std::size_t a = 1; a < num_actions_; ++a) m = std::max(m, (*this)(s, a));
    return m;
}

double TabularQ::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double value_iteration_stop_threshold(double discount, double tol) { return 0.5 * tol * (1.0 - discount); }

TabularQ value_iteration(const GridWorld& env, double discount, double tol) {
    env.validate();
    if (!(discount >= 0.0 && discount < 1.0)) throw InvalidInput("value_iteration: discount must lie in [0, 1)");
    if (!(tol > 0.0)) throw InvalidInput("value_iteration: tol must be positive");

    const std::size_t n = env.num_cells();
    const std::size_t goal = env.index(env.goal);
    const double stop = value_iteration_stop_threshold(discount, tol);
    TabularQ q(n, kNumActions);
    // A change of at most `stop` bounds the distance to the fixed point by
    // stop * discount / (1 - discount) < tol / 2.
    for (;;) {
        TabularQ next(n, kNumActions);
        double delta = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const Cell c = env.cell(s);
            if (s == goal || env.is_obstacle(c)) continue;
            for (Action a : kAllActions) {
                const Cell to = env.move(c, a);
                const std::size_t t = env.index(to);
                const double v = t == goal ? env.goal_reward : env.step_reward + discount * q.max_value(t);
                const auto ai = static_cast<std::size_t>(a);
                next(s, ai) = v;
                delta = std::max(delta, std::abs(v - q(s, ai)));
            }
        }
        q = std::move(next);
        if (delta <= stop) break;
    }
    return q;
}

}  // namespace qnrl
