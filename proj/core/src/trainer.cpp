#include "qnrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "qnrl/errors.hpp"

namespace qnrl {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::lbfgs ? "lbfgs" : "sgd"; }

const char* stop_reason_name(StopReason r) { return r == StopReason::total_steps ? "total_steps" : "grad_norm"; }

void TrainConfig::validate() const {
    if (batch_size == 0) throw InvalidInput("batch_size must be at least 1");
    if (lbfgs_memory == 0) throw InvalidInput("lbfgs_memory must be at least 1");
    if (!(discount >= 0.0 && discount <= 1.0)) throw InvalidInput("discount must lie in [0, 1]");
    if (!(eps_start <= 1.0 && eps_start >= eps_end && eps_end >= 0.0))
        throw InvalidInput("need 1 >= eps_start >= eps_end >= 0");
    if (!(eps_anneal_fraction >= 0.0 && eps_anneal_fraction <= 1.0))
        throw InvalidInput("eps_anneal_fraction must lie in [0, 1]");
    if (total_steps == 0) throw InvalidInput("total_steps must be positive");
    if (!(test_eps >= 0.0 && test_eps <= 1.0)) throw InvalidInput("test_eps must lie in [0, 1]");
    if (test_interval == 0) throw InvalidInput("test_interval must be positive");
    if (!(grad_norm_stop_threshold >= 0.0)) throw InvalidInput("grad_norm_stop_threshold must be non-negative");
    wolfe.validate();
    if (optimizer == OptimizerKind::sgd) {
        if (!(sgd_learning_rate > 0.0)) throw InvalidInput("sgd_learning_rate must be positive");
        if (sgd_batch_size == 0 || sgd_update_frequency == 0)
            throw InvalidInput("sgd_batch_size and sgd_update_frequency must be positive");
    }
}

std::size_t TrainConfig::anneal_steps() const {
    return static_cast<std::size_t>(eps_anneal_fraction * static_cast<double>(total_steps));
}

TrainerState TrainerState::initial(const NetworkSpec& spec, const TrainConfig& config) {
    ParamVector w = init_weights(spec, config.seed);
    ParamVector target = w;
    const std::size_t n = w.size();
    return TrainerState{std::move(w),
                        std::move(target),
                        LbfgsMemory(config.lbfgs_memory, n),
                        ExperienceMemory(config.batch_size),
                        std::nullopt,
                        0,
                        0,
                        Rng(config.seed ^ 0x9e3779b97f4a7c15ULL)};
}

double epsilon_schedule(std::size_t step, std::size_t total_anneal_steps, double eps_start, double eps_end) {
    if (step >= total_anneal_steps) return eps_end;
    const double t = static_cast<double>(step) / static_cast<double>(total_anneal_steps);
    return eps_start + t * (eps_end - eps_start);
}

std::size_t argmax(std::span<const double> q) {
    if (q.empty()) throw InvalidInput("argmax: empty value vector");
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    return best;
}

std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("epsilon_greedy: eps must lie in [0, 1]");
    if (q.empty()) throw InvalidInput("epsilon_greedy: empty value vector");
    if (eps > 0.0 && uniform01(rng) < eps) return uniform_index(rng, q.size());
    return argmax(q);
}

double td_target(const Experience& e, const NetworkSpec& spec, std::span<const double> w_target, double discount) {
    if (e.terminal || discount == 0.0) return e.r;
    const QValues next = forward(spec, w_target, e.s_next);
    return e.r + discount * *std::max_element(next.begin(), next.end());
}

std::vector<double> td_targets(const NetworkSpec& spec, std::span<const double> w_target,
                               const ExperienceMemory& memory, double discount) {
    std::vector<double> y;
    y.reserve(memory.size());
    for (const Experience& e : memory.items()) y.push_back(td_target(e, spec, w_target, discount));
    return y;
}

BatchEvaluation evaluate_batch(const NetworkSpec& spec, std::span<const double> w, const ExperienceMemory& memory,
                               std::span<const double> targets, bool with_grad) {
    if (memory.empty()) throw InvalidInput("evaluate_batch: experience memory is empty");
    require_same_size(targets.size(), memory.size(), "evaluate_batch targets");
    const double inv = 1.0 / static_cast<double>(memory.size());
    BatchEvaluation out;
    if (with_grad) out.grad.assign(w.size(), 0.0);
    double sq = 0.0;
    for (std::size_t i = 0; i < memory.size(); ++i) {
        const Experience& e = memory[i];
        if (with_grad) {
            const double target = targets[i];
            value_and_accumulate_grad(
                spec, w, e.s, e.a,
                [&](double q) {
                    const double residual = target - q;
                    sq += residual * residual;
                    return -residual * inv;
                },
                out.grad);
        } else {
            const double residual = targets[i] - forward(spec, w, e.s)[e.a];
            sq += residual * residual;
        }
    }
    out.loss = 0.5 * sq * inv;
    return out;
}

double batch_loss(const NetworkSpec& spec, std::span<const double> w, std::span<const double> w_target,
                  const ExperienceMemory& memory, double discount) {
    if (memory.empty()) throw InvalidInput("batch_loss: experience memory is empty");
    return evaluate_batch(spec, w, memory, td_targets(spec, w_target, memory, discount), false).loss;
}

ParamVector overlap_gradient(const NetworkSpec& spec, std::span<const double> w, std::span<const double> w_target,
                             const ExperienceMemory& memory, double discount) {
    if (memory.empty()) throw InvalidInput("overlap_gradient: experience memory is empty");
    return evaluate_batch(spec, w, memory, td_targets(spec, w_target, memory, discount), true).grad;
}

ParamVector combined_gradient(std::span<const double> g_current, std::span<const double> g_previous) {
    require_same_size(g_current.size(), g_previous.size(), "combined_gradient");
    ParamVector out(g_current.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (g_current[i] + g_previous[i]);
    return out;
}

ParamVector overlap_y(std::span<const double> g_next, std::span<const double> g_curr) {
    return subtract(g_next, g_curr);
}

ParamVector sgd_step(std::span<const double> w, std::span<const double> g, double lr) {
    require_same_size(w.size(), g.size(), "sgd_step");
    if (!(lr > 0.0)) throw InvalidInput("sgd_step: learning rate must be positive");
    return add_scaled(w, -lr, g);
}

namespace {

void require_finite(double loss, std::span<const double> grad, const char* where) {
    if (!std::isfinite(loss) || !all_finite(grad))
        throw Diverged(std::string(where) + ": non-finite loss or gradient");
}

}  // namespace

StepResult optimization_step(TrainerState state, const NetworkSpec& spec, const TrainConfig& config) {
    if (state.memory.size() != config.batch_size)
        throw InvalidInput("optimization_step: experience memory holds " + std::to_string(state.memory.size()) +
                           " transitions, expected " + std::to_string(config.batch_size));

    TrainLogRecord rec;
    rec.k = state.k;
    rec.env_steps = state.env_steps;

    // Targets come from the previous iterate and stay fixed for the whole step.
    const std::vector<double> targets = td_targets(spec, state.w_target, state.memory, config.discount);

    BatchEvaluation here = evaluate_batch(spec, state.w, state.memory, targets, true);
    require_finite(here.loss, here.grad, "optimization_step");
    const ParamVector& g_overlap = here.grad;
    ParamVector g_combined = state.prev_overlap_grad ? combined_gradient(g_overlap, *state.prev_overlap_grad)
                                                     : g_overlap;
    rec.loss = here.loss;
    rec.grad_norm = norm2(g_combined);

    ParamVector p = search_direction(state.mem, g_combined);
    double slope0 = dot(g_overlap, p);
    if (!(slope0 < 0.0)) {
        p = search_direction(state.mem, g_overlap);
        slope0 = dot(g_overlap, p);
        rec.direction_reset = true;
    }
    rec.directional_derivative = slope0;

    ParamVector w_next = state.w;
    ParamVector g_next = g_overlap;
    double loss_next = here.loss;
    if (slope0 < 0.0) {
        ParamVector last_grad;
        const LineObjective phi = [&](double alpha) {
            BatchEvaluation e = evaluate_batch(spec, add_scaled(state.w, alpha, p), state.memory, targets, true);
            const double slope = all_finite(e.grad) ? dot(e.grad, p) : std::numeric_limits<double>::quiet_NaN();
            last_grad = std::move(e.grad);
            return LinePoint{e.loss, slope};
        };
        const LineSearchResult ls = line_search(phi, here.loss, slope0, config.wolfe);
        rec.alpha = ls.alpha;
        rec.wolfe_satisfied = ls.wolfe_satisfied;
        rec.floor_hit = ls.floor_hit;
        rec.f_evals = ls.f_evals;
        rec.g_evals = ls.g_evals;
        w_next = add_scaled(state.w, ls.alpha, p);
        g_next = std::move(last_grad);  // last trial was at ls.alpha
        loss_next = ls.at_alpha.value;
        require_finite(loss_next, g_next, "optimization_step line search");
    }
    rec.loss_next = loss_next;

    ParamVector s = subtract(w_next, state.w);
    ParamVector y = overlap_y(g_next, g_overlap);
    rec.pair_accepted = state.mem.push(std::move(s), std::move(y));

    state.w_target = std::move(state.w);
    state.w = std::move(w_next);
    state.prev_overlap_grad = std::move(g_next);
    state.memory.clear();
    ++state.k;
    return {std::move(state), rec};
}

StepResult sgd_update(TrainerState state, const NetworkSpec& spec, const TrainConfig& config) {
    if (state.memory.empty()) throw InvalidInput("sgd_update: experience memory is empty");
    ExperienceMemory batch(config.sgd_batch_size);
    for (std::size_t i = 0; i < config.sgd_batch_size; ++i)
        batch.push(state.memory[uniform_index(state.rng, state.memory.size())]);

    TrainLogRecord rec;
    rec.k = state.k;
    rec.env_steps = state.env_steps;
    const std::vector<double> targets = td_targets(spec, state.w_target, batch, config.discount);
    BatchEvaluation e = evaluate_batch(spec, state.w, batch, targets, true);
    require_finite(e.loss, e.grad, "sgd_update");
    rec.loss = e.loss;
    rec.grad_norm = norm2(e.grad);
    rec.alpha = config.sgd_learning_rate;
    rec.f_evals = 1;
    rec.g_evals = 1;
    rec.directional_derivative = -rec.grad_norm * rec.grad_norm;

    ParamVector w_next = sgd_step(state.w, e.grad, config.sgd_learning_rate);
    rec.loss_next = evaluate_batch(spec, w_next, batch, targets, false).loss;
    state.w_target = std::move(state.w);
    state.w = std::move(w_next);
    ++state.k;
    return {std::move(state), rec};
}

NetworkSpec default_network(const GridWorld& env) {
    NetworkSpec spec;
    spec.layer_sizes = {env.num_cells(), kNumActions};
    return spec;
}

std::size_t greedy_action(const NetworkSpec& spec, std::span<const double> w, const GridWorld& env, Cell c) {
    return argmax(forward(spec, w, features(env, c)));
}

double q_optimality_gap(const NetworkSpec& spec, std::span<const double> w, const TabularQ& oracle,
                        const GridWorld& env) {
    if (oracle.num_states() != env.num_cells() || oracle.num_actions() != spec.action_count())
        throw InvalidInput("q_optimality_gap: oracle does not match the environment");
    double gap = 0.0;
    for (std::size_t s = 0; s < env.num_cells(); ++s) {
        const Cell c = env.cell(s);
        if (c == env.goal || env.is_obstacle(c)) continue;
        const QValues q = forward(spec, w, features(env, c));
        for (std::size_t a = 0; a < q.size(); ++a) gap = std::max(gap, std::abs(q[a] - oracle(s, a)));
    }
    return gap;
}

double policy_agreement(const NetworkSpec& spec, std::span<const double> w, const TabularQ& oracle,
                        const GridWorld& env) {
    std::size_t total = 0;
    std::size_t agree = 0;
    for (const Cell& c : env.reachable_cells()) {
        if (c == env.goal) continue;
        const std::size_t s = env.index(c);
        const std::size_t a = greedy_action(spec, w, env, c);
        ++total;
        if (oracle(s, a) >= oracle.max_value(s) - 1e-9) ++agree;
    }
    return total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total);
}

double evaluate_episode(const NetworkSpec& spec, std::span<const double> w, const GridWorld& env, double eps,
                        Rng& rng) {
    EnvState s = env_reset(env);
    double score = 0.0;
    while (!s.terminal) {
        const QValues q = forward(spec, w, features(env, s.pos));
        const StepOutcome out = env_step(env, s, static_cast<Action>(epsilon_greedy(q, eps, rng)));
        score += out.reward;
        s = out.state;
    }
    return score;
}

TrainRun train(const TrainConfig& config, const GridWorld& env, const NetworkSpec& spec,
               const TrainOptions& options) {
    config.validate();
    env.validate();
    spec.validate();
    if (spec.input_dim() != env.num_cells())
        throw InvalidInput("train: network input size must equal the number of grid cells");
    if (spec.action_count() != kNumActions) throw InvalidInput("train: network output size must be 4");

    using Clock = std::chrono::steady_clock;
    TrainRun run;
    TrainerState state = TrainerState::initial(spec, config);
    if (config.optimizer == OptimizerKind::sgd) state.memory = ExperienceMemory(config.batch_size);
    run.initial_weights = state.w;
    Rng eval_rng(config.seed ^ 0x5851f42d4c957f2dULL);
    std::optional<double> pending_score;
    const std::size_t anneal = config.anneal_steps();
    const bool lbfgs = config.optimizer == OptimizerKind::lbfgs;
    auto step_started = Clock::now();
    bool stop = false;

    while (!stop && state.env_steps < config.total_steps) {
        ++run.episodes;
        EnvState s = env_reset(env);
        while (!s.terminal && !stop && state.env_steps < config.total_steps) {
            const double eps = epsilon_schedule(state.env_steps, anneal, config.eps_start, config.eps_end);
            std::vector<double> phi = features(env, s.pos);
            const QValues q = forward(spec, state.w, phi);
            const std::size_t a = epsilon_greedy(q, eps, state.rng);
            const StepOutcome out = env_step(env, s, static_cast<Action>(a));
            Experience e{std::move(phi), a, out.reward, features(env, out.state.pos), out.terminal};
            if (lbfgs)
                state.memory.push(std::move(e));
            else
                state.memory.push_evicting(std::move(e));
            s = out.state;
            ++state.env_steps;

            if (state.env_steps % config.test_interval == 0)
                pending_score = evaluate_episode(spec, state.w, env, config.test_eps, eval_rng);

            const bool due = lbfgs ? state.memory.full()
                                   : state.env_steps % config.sgd_update_frequency == 0 &&
                                         state.memory.size() >= config.sgd_batch_size;
            if (!due) continue;

            StepResult r = lbfgs ? optimization_step(std::move(state), spec, config)
                                 : sgd_update(std::move(state), spec, config);
            state = std::move(r.state);
            TrainLogRecord rec = r.record;
            rec.epsilon = eps;
            rec.test_score = pending_score;
            pending_score.reset();
            if (options.oracle) rec.q_gap = q_optimality_gap(spec, state.w, *options.oracle, env);
            if (options.record_wall_time) {
                const auto now = Clock::now();
                rec.wall_ms = std::chrono::duration<double, std::milli>(now - step_started).count();
                step_started = now;
            }
            if (options.on_step) options.on_step(state, rec);
            if (rec.grad_norm < config.grad_norm_stop_threshold) {
                run.stop_reason = StopReason::grad_norm;
                stop = true;
            }
            run.records.push_back(rec);
        }
    }
    if (pending_score) run.last_test_score = pending_score;
    for (auto it = run.records.rbegin(); !run.last_test_score && it != run.records.rend(); ++it)
        if (it->test_score) run.last_test_score = it->test_score;
    run.final_weights = std::move(state.w);
    run.env_steps = state.env_steps;
    return run;
}

}  // namespace qnrl
