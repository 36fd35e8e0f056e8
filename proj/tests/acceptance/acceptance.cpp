// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: qnrl_acceptance [work_dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qnrl/bench.hpp"
#include "qnrl/io.hpp"
#include "qnrl/lbfgs.hpp"
#include "qnrl/trainer.hpp"
#include "qnrl_app/commands.hpp"

using namespace qnrl;
using qnrl::testing::Gen;
using qnrl::testing::rel_error;

namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double time_limit_s;
    std::function<Verdict()> run;
};

std::string num(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

NetworkSpec spec_of(std::vector<std::size_t> layers) {
    NetworkSpec s;
    s.layer_sizes = std::move(layers);
    return s;
}

Verdict two_loop_oracle() {
    Gen gen(1001);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + gen.index(10);
        const LbfgsMemory m = gen.memory(n, 1 + gen.index(5), 5);
        const ParamVector g = gen.vector(n);
        worst = std::max(worst, rel_error(two_loop(m, g), dense_inverse_hessian(m, n).multiply(g)));
    }
    return {worst < 1e-10, "1000 cases, worst rel. error " + num(worst)};
}

Verdict secant_and_pd() {
    Gen gen(1002);
    double worst_secant = 0.0;
    std::size_t non_positive = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + gen.index(10);
        const LbfgsMemory m = gen.memory(n, 1 + gen.index(5), 5);
        worst_secant = std::max(worst_secant, rel_error(two_loop(m, m.latest().y), m.latest().s));
        for (int p = 0; p < 100; ++p) {
            const ParamVector v = gen.vector(n);
            if (!(dot(v, two_loop(m, v)) > 0.0)) ++non_positive;
        }
    }
    return {worst_secant < 1e-10 && non_positive == 0,
            "100 memories x 100 probes, worst secant rel. error " + num(worst_secant) + ", non-positive probes " +
                std::to_string(non_positive)};
}

Verdict gradient_checks() {
    Gen gen(1003);
    double worst_q = 0.0;
    double worst_batch = 0.0;
    int q_cases = 0;
    int batch_cases = 0;
    while (q_cases < 100 || batch_cases < 100) {
        const auto layers = gen.layers(2, 4, 8);
        const NetworkSpec s = spec_of(layers);
        if (num_params(s) > 1000) continue;
        const ParamVector w = gen.vector(num_params(s));
        if (q_cases < 100) {
            const std::vector<double> x = gen.vector(layers.front());
            if (testing::away_from_kinks(layers, w, x, 1e-3)) {
                const std::size_t a = gen.index(layers.back());
                const ParamVector fd = testing::central_differences(
                    [&](std::span<const double> v) { return testing::naive_forward(layers, v, x)[a]; }, w, 1e-5);
                worst_q = std::max(worst_q, rel_error(grad_q(s, w, x, a), fd, 1e-8));
                ++q_cases;
            }
        }
        if (batch_cases < 100) {
            const ParamVector wt = gen.vector(num_params(s));
            const ExperienceMemory m = gen.batch(1 + gen.index(32), layers.front(), layers.back());
            bool smooth = true;
            for (const Experience& e : m.items()) smooth = smooth && testing::away_from_kinks(layers, w, e.s, 1e-3);
            if (smooth) {
                const ParamVector fd = testing::central_differences(
                    [&](std::span<const double> v) { return testing::naive_batch_loss(layers, v, wt, m, 0.95); }, w,
                    1e-5);
                worst_batch = std::max(worst_batch, rel_error(overlap_gradient(s, w, wt, m, 0.95), fd, 1e-8));
                ++batch_cases;
            }
        }
    }
    return {worst_q < 1e-6 && worst_batch < 1e-6, "grad_q worst " + num(worst_q) + " over " +
                                                       std::to_string(q_cases) + " cases, overlap_gradient worst " +
                                                       num(worst_batch) + " over " + std::to_string(batch_cases)};
}

Verdict cost_model() {
    const double r = cost_ratio(4, 5, 32, 2048, 20);
    const double rounded = std::round(r * 100.0) / 100.0;
    return {rounded == 0.63, "cost_ratio(4, 5, 32, 2048, 20) = " + format_double(r) + " -> " + num(rounded, 2)};
}

Verdict bound_check() {
    std::size_t violations = 0;
    double worst = 0.0;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const QuadraticProblem p = make_quadratic(seed, 20, 1.0, 10.0, 16);
        ConvexBenchSettings s;
        s.optimizer = BenchOptimizer::lbfgs_fixed_alpha;
        s.alpha = 0.4;
        s.batch_fraction = 0.25;
        s.iterations = 500;
        s.seed = seed;
        const ConvexBenchTrace t = run_convex_bench(p, s);
        const BoundConstants c = t.constants(p, s.alpha);
        c.validate();
        const BoundCheck check = check_theorem1(t, c);
        violations += check.violations;
        worst = std::max(worst, check.worst_ratio);
    }
    detail << "5 seeds x 500 iterations, alpha 0.4, violations " << violations << ", max gap/bound " << num(worst);
    return {violations == 0, detail.str()};
}

Verdict rosenbrock() {
    const SmoothObjective f = [](std::span<const double> x, std::span<double> g) {
        const RosenbrockValue v = rosenbrock_eval(x);
        g[0] = v.g[0];
        g[1] = v.g[1];
        return v.f;
    };
    MinimizeSettings s;
    s.memory = 10;
    const MinimizeResult r = minimize_lbfgs(f, {-1.2, 1.0}, s);
    return {r.converged && r.iterations <= 200 && r.grad_norm < 1e-5,
            "m = 10, iterations " + std::to_string(r.iterations) + ", |g| = " + num(r.grad_norm)};
}

struct RlRun {
    std::uint64_t seed;
    TrainRun run;
    double initial_gap;
    double final_gap;
    double agreement;
    std::size_t nonempty_after_step;
};

std::vector<RlRun> rl_runs;

TrainConfig rl_config(std::uint64_t seed) {
    TrainConfig c;
    c.batch_size = 512;
    c.lbfgs_memory = 20;
    c.total_steps = 200000;
    c.seed = seed;
    return c;
}

Verdict end_to_end() {
    const GridWorld env = default_gridworld();
    const NetworkSpec spec = default_network(env);
    const TrainConfig base = rl_config(1);
    const TabularQ oracle = value_iteration(env, base.discount, 1e-10);
    bool pass = true;
    std::ostringstream detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        RlRun r{seed, {}, 0.0, 0.0, 0.0, 0};
        TrainOptions opt;
        opt.on_step = [&](const TrainerState& st, const TrainLogRecord&) {
            if (!st.memory.empty()) ++r.nonempty_after_step;
        };
        r.run = train(rl_config(seed), env, spec, opt);
        r.initial_gap = q_optimality_gap(spec, r.run.initial_weights, oracle, env);
        r.final_gap = q_optimality_gap(spec, r.run.final_weights, oracle, env);
        r.agreement = policy_agreement(spec, r.run.final_weights, oracle, env);
        pass = pass && r.agreement >= 0.95 && r.final_gap < r.initial_gap && r.run.env_steps <= 200000;
        detail << (seed > 1 ? "; " : "") << "seed " << seed << ": agreement " << num(r.agreement) << ", gap "
               << num(r.initial_gap) << " -> " << num(r.final_gap);
        rl_runs.push_back(std::move(r));
    }
    return {pass, detail.str()};
}

Verdict step_sizes() {
    if (rl_runs.empty()) return {false, "criterion 7 runs unavailable"};
    const WolfeParams w;
    std::size_t steps = 0, out_of_range = 0, armijo_broken = 0, unit = 0;
    for (const RlRun& r : rl_runs) {
        for (const TrainLogRecord& rec : r.run.records) {
            ++steps;
            if (rec.alpha < 0.1 || rec.alpha > 1.0) ++out_of_range;
            if (rec.alpha == 1.0) ++unit;
            if (rec.wolfe_satisfied && !(rec.loss_next <= rec.loss + w.c1 * rec.alpha * rec.directional_derivative))
                ++armijo_broken;
        }
    }
    return {steps > 0 && out_of_range == 0 && armijo_broken == 0,
            std::to_string(steps) + " steps, alpha outside [0.1, 1]: " + std::to_string(out_of_range) +
                ", sufficient decrease broken: " + std::to_string(armijo_broken) +
                ", alpha = 1 on " + num(100.0 * static_cast<double>(unit) / static_cast<double>(steps)) + "% of steps"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict memory_and_determinism(const fs::path& work) {
    std::size_t nonempty = 0;
    for (const RlRun& r : rl_runs) nonempty += r.nonempty_after_step;
    const bool have_runs = !rl_runs.empty();

    std::vector<std::string> logs;
    for (const char* tag : {"a", "b"}) {
        const fs::path out = work / ("determinism_" + std::string(tag));
        fs::remove_all(out);
        const std::string out_s = out.string();
        const char* argv[] = {"qnrl", "train", "--env", "gridworld6", "--b", "512", "--m", "20", "--seed", "1",
                              "--out", out_s.c_str()};
        std::ostringstream sink;
        if (app::run_cli(12, argv, sink, sink) != 0) return {false, "train command failed: " + sink.str()};
        logs.push_back(slurp(out / "train_log.csv"));
    }
    const bool identical = !logs[0].empty() && logs[0] == logs[1];
    return {have_runs && nonempty == 0 && identical,
            "non-empty memory after a step: " + std::to_string(nonempty) + ", train_log.csv byte-identical: " +
                (identical ? "yes" : "no") + " (" + std::to_string(logs[0].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "qnrl_acceptance";
    fs::create_directories(work);

    const std::vector<Criterion> criteria{
        {1, "two-loop oracle equivalence", 5.0, two_loop_oracle},
        {2, "secant and positive definiteness", 5.0, secant_and_pd},
        {3, "gradient checks", 30.0, gradient_checks},
        {4, "cost model", 1.0, cost_model},
        {5, "convergence bound on a quadratic", 60.0, bound_check},
        {6, "rosenbrock smoke test", 1.0, rosenbrock},
        {7, "end-to-end gridworld", 600.0, end_to_end},
        {8, "step-size protocol", 1.0, step_sizes},
        {9, "memory discipline and determinism", 60.0, [&] { return memory_and_determinism(work); }},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.time_limit_s;
        const bool pass = v.pass && in_time;
        if (!pass) ++failures;
        std::cout << "criterion " << c.id << " [" << c.title << "]: " << (pass ? "PASS" : "FAIL") << " - "
                  << v.detail << " (" << num(secs) << " s, limit " << num(c.time_limit_s) << " s"
                  << (in_time ? "" : ", exceeded") << ")" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
