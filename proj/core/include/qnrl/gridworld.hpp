#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qnrl {

/// Column x, row y; row 0 is the first line of a grid file.
struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

enum class Action : std::size_t { up = 0, down = 1, left = 2, right = 3 };
inline constexpr std::size_t kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions{Action::up, Action::down, Action::left,
                                                              Action::right};

const char* action_name(Action a);

/// Deterministic episodic grid. Entering the goal ends the episode with
/// goal_reward; every other move costs step_reward. Moves into the boundary or
/// an obstacle leave the agent in place.
struct GridWorld {
    int width = 0;
    int height = 0;
    Cell start;
    Cell goal;
    std::vector<Cell> obstacles;
    double step_reward = -0.01;
    double goal_reward = 1.0;
    std::size_t max_episode_steps = 200;

    void validate() const;

    std::size_t num_cells() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width + static_cast<std::size_t>(c.x); }
    Cell cell(std::size_t index) const {
        return {static_cast<int>(index % width), static_cast<int>(index / width)};
    }
    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    bool is_obstacle(Cell c) const;
    bool is_free(Cell c) const { return in_bounds(c) && !is_obstacle(c); }

    /// Cell reached by `a` from `c`, ignoring episode bookkeeping.
    Cell move(Cell c, Action a) const;

    /// Free cells reachable from start (including start and goal).
    std::vector<Cell> reachable_cells() const;
};

/// 6x6, four obstacles, start top-left, goal bottom-right.
GridWorld default_gridworld();

/// '.' empty, '#' obstacle, 'S' start, 'G' goal; one row per line.
GridWorld parse_grid(std::string_view text);
GridWorld load_grid_file(const std::filesystem::path& path);

/// Position plus episode bookkeeping.
struct EnvState {
    Cell pos;
    std::size_t steps = 0;
    bool terminal = false;
    friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepOutcome {
    EnvState state;
    double reward;
    bool terminal;
};

EnvState env_reset(const GridWorld& env);

/// Terminal on entering the goal or when the step counter reaches
/// max_episode_steps. Throws InvalidTransition when `state` is already terminal.
StepOutcome env_step(const GridWorld& env, const EnvState& state, Action action);

/// One-hot of length width * height.
std::vector<double> features(const GridWorld& env, Cell c);

/// Q table over (cell index, action); obstacle and goal rows are zero.
class TabularQ {
public:
    TabularQ(std::size_t num_states, std::size_t num_actions);

    double& operator()(std::size_t s, std::size_t a) { return values_[s * num_actions_ + a]; }
    double operator()(std::size_t s, std::size_t a) const { return values_[s * num_actions_ + a]; }
    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }
    double max_value(std::size_t s) const;
    double max_abs() const;
    const std::vector<double>& values() const { return values_; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> values_;
};

/// Bellman-optimality fixed point of the untruncated MDP, to sup-norm error
/// below tol / 2. Requires 0 <= discount < 1 and tol > 0.
TabularQ value_iteration(const GridWorld& env, double discount, double tol);

/// Sweeps stop once the sup-norm change is at most this, for the given tol.
double value_iteration_stop_threshold(double discount, double tol);

}  // namespace qnrl
