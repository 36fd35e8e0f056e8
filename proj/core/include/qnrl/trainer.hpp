#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnrl/experience.hpp"
#include "qnrl/gridworld.hpp"
#include "qnrl/lbfgs.hpp"
#include "qnrl/linesearch.hpp"
#include "qnrl/qnet.hpp"
#include "qnrl/rng.hpp"

namespace qnrl {

enum class OptimizerKind { lbfgs, sgd };

const char* optimizer_name(OptimizerKind k);

struct TrainConfig {
    std::size_t batch_size = 2048;
    std::size_t lbfgs_memory = 40;
    double discount = 0.95;
    double eps_start = 1.0;
    double eps_end = 0.1;
    /// Fraction of total_steps over which epsilon is annealed.
    double eps_anneal_fraction = 0.5;
    std::size_t total_steps = 200000;
    double test_eps = 0.05;
    std::size_t test_interval = 10000;
    double grad_norm_stop_threshold = 1e-6;
    WolfeParams wolfe;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::lbfgs;
    double sgd_learning_rate = 0.00025;
    std::size_t sgd_batch_size = 32;
    std::size_t sgd_update_frequency = 4;

    void validate() const;
    std::size_t anneal_steps() const;
};

struct TrainLogRecord {
    std::size_t k = 0;
    std::size_t env_steps = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double alpha = 0.0;
    bool wolfe_satisfied = false;
    bool floor_hit = false;
    bool pair_accepted = false;
    double epsilon = 0.0;
    std::size_t f_evals = 0;
    std::size_t g_evals = 0;
    std::optional<double> test_score;
    std::optional<double> wall_ms;
    /// Batch loss at the new iterate with the same frozen targets.
    double loss_next = 0.0;
    /// phi'(0): overlap gradient dotted with the search direction.
    double directional_derivative = 0.0;
    /// The combined-gradient direction was not a descent direction for the
    /// current batch, so the step used -H g on the current batch instead.
    bool direction_reset = false;
    std::optional<double> q_gap;
};

struct TrainerState {
    ParamVector w;
    ParamVector w_target;
    LbfgsMemory mem;
    ExperienceMemory memory;
    std::optional<ParamVector> prev_overlap_grad;
    std::size_t k = 0;
    std::size_t env_steps = 0;
    Rng rng;

    /// w0 from init_weights(spec, seed); target = w0; empty memories.
    static TrainerState initial(const NetworkSpec& spec, const TrainConfig& config);
};

double epsilon_schedule(std::size_t step, std::size_t total_anneal_steps, double eps_start, double eps_end);

/// Uniform random action with probability eps, else the argmax (lowest index on ties).
std::size_t epsilon_greedy(std::span<const double> q, double eps, Rng& rng);

std::size_t argmax(std::span<const double> q);

double td_target(const Experience& e, const NetworkSpec& spec, std::span<const double> w_target, double discount);

std::vector<double> td_targets(const NetworkSpec& spec, std::span<const double> w_target,
                               const ExperienceMemory& memory, double discount);

struct BatchEvaluation {
    double loss = 0.0;
    ParamVector grad;  // empty unless requested
};

/// Loss (and optionally overlap gradient) over `memory` against fixed targets.
/// Summation runs over the buffer in order.
BatchEvaluation evaluate_batch(const NetworkSpec& spec, std::span<const double> w, const ExperienceMemory& memory,
                               std::span<const double> targets, bool with_grad);

/// (1 / 2|D|) sum (Y - Q(s, a; w))^2 with Y from the target network.
double batch_loss(const NetworkSpec& spec, std::span<const double> w, std::span<const double> w_target,
                  const ExperienceMemory& memory, double discount);

/// (-1 / |D|) sum (Y - Q(s, a; w)) grad Q(s, a; w).
ParamVector overlap_gradient(const NetworkSpec& spec, std::span<const double> w, std::span<const double> w_target,
                             const ExperienceMemory& memory, double discount);

/// (g_current + g_previous) / 2
ParamVector combined_gradient(std::span<const double> g_current, std::span<const double> g_previous);

/// Gradient difference on one sample: g_next - g_curr.
ParamVector overlap_y(std::span<const double> g_next, std::span<const double> g_curr);

ParamVector sgd_step(std::span<const double> w, std::span<const double> g, double lr);

struct StepResult {
    TrainerState state;
    TrainLogRecord record;
};

/// One multi-batch line-search L-BFGS update on the full memory.
/// Requires |memory| == batch_size. Throws Diverged on non-finite loss or gradient.
StepResult optimization_step(TrainerState state, const NetworkSpec& spec, const TrainConfig& config);

/// SGD update on a minibatch sampled (with replacement) from the memory.
StepResult sgd_update(TrainerState state, const NetworkSpec& spec, const TrainConfig& config);

/// Network used for the gridworld when none is configured: one linear layer on the one-hot state.
NetworkSpec default_network(const GridWorld& env);

/// Greedy policy of the network at a cell.
std::size_t greedy_action(const NetworkSpec& spec, std::span<const double> w, const GridWorld& env, Cell c);

/// Sup over free, non-goal cells and all actions of |Q(s, a; w) - Q*(s, a)|.
double q_optimality_gap(const NetworkSpec& spec, std::span<const double> w, const TabularQ& oracle,
                        const GridWorld& env);

/// Fraction of reachable non-goal cells whose greedy action is optimal under the oracle.
double policy_agreement(const NetworkSpec& spec, std::span<const double> w, const TabularQ& oracle,
                        const GridWorld& env);

/// Total reward of one episode from start with epsilon-greedy actions.
double evaluate_episode(const NetworkSpec& spec, std::span<const double> w, const GridWorld& env, double eps,
                        Rng& rng);

enum class StopReason { total_steps, grad_norm };

const char* stop_reason_name(StopReason r);

struct TrainOptions {
    /// When set, every record carries q_optimality_gap against it.
    const TabularQ* oracle = nullptr;
    bool record_wall_time = false;
    /// Called after every update with the post-step state.
    std::function<void(const TrainerState&, const TrainLogRecord&)> on_step;
};

struct TrainRun {
    std::vector<TrainLogRecord> records;
    ParamVector initial_weights;
    ParamVector final_weights;
    StopReason stop_reason = StopReason::total_steps;
    std::size_t env_steps = 0;
    std::size_t episodes = 0;
    std::optional<double> last_test_score;
};

TrainRun train(const TrainConfig& config, const GridWorld& env, const NetworkSpec& spec,
               const TrainOptions& options = {});

}  // namespace qnrl
