#include "qnrl_app/commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "qnrl/bench.hpp"
#include "qnrl/errors.hpp"
#include "qnrl/io.hpp"

namespace qnrl::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const std::vector<KeySpec>& train_keys() {
    static const std::vector<KeySpec> keys{
        {"env", "gridworld6", "built-in environment name or path to a grid file"},
        {"step_reward", "-0.01", "reward for every non-goal move"},
        {"goal_reward", "1", "reward for entering the goal"},
        {"max_episode_steps", "200", "episode truncation length"},
        {"layers", "", "comma-separated layer sizes; default <cells>,4 (linear in the one-hot state)"},
        {"b", "2048", "batch size / experience memory capacity"},
        {"m", "40", "L-BFGS memory size"},
        {"gamma", "0.95", "discount factor"},
        {"eps_start", "1", "initial exploration rate"},
        {"eps_end", "0.1", "final exploration rate"},
        {"eps_anneal_fraction", "0.5", "fraction of total_steps spent annealing epsilon"},
        {"total_steps", "200000", "environment steps"},
        {"test_eps", "0.05", "exploration rate of evaluation episodes"},
        {"test_interval", "10000", "environment steps between evaluation episodes"},
        {"grad_stop", "1e-6", "stop once the combined gradient norm falls below this"},
        {"c1", "1e-4", "sufficient decrease constant"},
        {"c2", "0.9", "curvature constant"},
        {"alpha_init", "1", "first trial step"},
        {"alpha_min", "0.1", "step size floor"},
        {"max_backtracks", "10", "maximum halvings per line search"},
        {"seed", "1", "random seed"},
        {"optimizer", "lbfgs", "lbfgs or sgd"},
        {"lr", "0.00025", "SGD learning rate"},
        {"sgd_batch", "32", "SGD minibatch size"},
        {"sgd_freq", "4", "environment steps between SGD updates"},
        {"log_wall_time", "false", "fill the wall_ms column (breaks byte-identical logs)"},
        {"out", "runs/train", "output directory"},
    };
    return keys;
}

const std::vector<KeySpec>& oracle_keys() {
    static const std::vector<KeySpec> keys{
        {"env", "gridworld6", "built-in environment name or path to a grid file"},
        {"step_reward", "-0.01", "reward for every non-goal move"},
        {"goal_reward", "1", "reward for entering the goal"},
        {"max_episode_steps", "200", "episode truncation length"},
        {"gamma", "0.95", "discount factor"},
        {"tol", "1e-10", "value iteration sup-norm tolerance"},
        {"checkpoint", "", "optional checkpoint to compare against Q*"},
        {"layers", "", "layer sizes of the checkpointed network; default <cells>,4 (linear in the one-hot state)"},
        {"gap_threshold", "inf", "report whether the checkpoint gap is below this"},
        {"out", "runs/oracle", "output directory"},
    };
    return keys;
}

const std::vector<KeySpec>& bench_quadratic_keys() {
    static const std::vector<KeySpec> keys{
        {"n", "20", "dimension"},
        {"lambda", "1", "smallest Hessian eigenvalue"},
        {"Lambda", "10", "largest Hessian eigenvalue"},
        {"partitions", "16", "additive loss components"},
        {"batch_fraction", "0.25", "share of components per minibatch (>= 1: full gradient)"},
        {"noise", "1", "spread of the component minimizers"},
        {"start_distance", "10", "distance of w0 from w*"},
        {"optimizer", "lbfgs-fixed-alpha", "lbfgs-fixed-alpha, lbfgs-line-search, lbfgs-exact or sgd"},
        {"alpha", "0.4", "fixed step size"},
        {"m", "10", "L-BFGS memory size"},
        {"iterations", "500", "iterations per run"},
        {"seed", "1", "seed of the first run"},
        {"runs", "5", "number of consecutive seeds"},
        {"out", "runs/bench", "output directory"},
    };
    return keys;
}

const std::vector<KeySpec>& bench_rosenbrock_keys() {
    static const std::vector<KeySpec> keys{
        {"m", "10", "L-BFGS memory size"},
        {"max_iterations", "200", "iteration budget"},
        {"grad_tol", "1e-5", "gradient norm tolerance"},
        {"x0", "-1.2", "starting x"},
        {"y0", "1", "starting y"},
        {"alpha_min", "1e-10", "line search floor"},
        {"alpha_max", "1e6", "line search expansion limit"},
        {"out", "runs/bench", "output directory"},
    };
    return keys;
}

const std::vector<KeySpec>& bench_cost_ratio_keys() {
    static const std::vector<KeySpec> keys{
        {"f", "4", "SGD update frequency"},
        {"z", "5", "gradient recomputations per line search"},
        {"bs", "32", "SGD batch size"},
        {"b", "2048", "L-BFGS batch size"},
        {"m", "20", "L-BFGS memory size"},
    };
    return keys;
}

namespace {

// Turns library InvalidInput raised while reading configuration into ConfigError.
template <typename F>
auto as_config(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what());
    }
}

void prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

ordered_json config_json(const ResolvedConfig& cfg) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : cfg.values()) j[k] = v;
    return j;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

}  // namespace

GridWorld environment_from(const ResolvedConfig& cfg) {
    const std::string& name = cfg.str("env");
    GridWorld env;
    if (name == "gridworld6") {
        env = default_gridworld();
    } else {
        if (!fs::is_regular_file(name)) throw ConfigError("environment file not found: " + name);
        env = as_config([&] { return load_grid_file(name); });
    }
    env.step_reward = cfg.real("step_reward");
    env.goal_reward = cfg.real("goal_reward");
    env.max_episode_steps = cfg.count("max_episode_steps");
    as_config([&] { env.validate(); });
    return env;
}

NetworkSpec network_from(const ResolvedConfig& cfg, const GridWorld& env) {
    NetworkSpec spec = default_network(env);
    if (!cfg.str("layers").empty()) spec.layer_sizes = cfg.size_list("layers");
    as_config([&] { spec.validate(); });
    if (spec.input_dim() != env.num_cells())
        throw ConfigError("layers: input size must equal the number of grid cells (" +
                          std::to_string(env.num_cells()) + ")");
    if (spec.action_count() != kNumActions) throw ConfigError("layers: output size must be 4");
    return spec;
}

TrainConfig train_config_from(const ResolvedConfig& cfg) {
    TrainConfig c;
    c.batch_size = cfg.count("b");
    c.lbfgs_memory = cfg.count("m");
    c.discount = cfg.real("gamma");
    c.eps_start = cfg.real("eps_start");
    c.eps_end = cfg.real("eps_end");
    c.eps_anneal_fraction = cfg.real("eps_anneal_fraction");
    c.total_steps = cfg.count("total_steps");
    c.test_eps = cfg.real("test_eps");
    c.test_interval = cfg.count("test_interval");
    c.grad_norm_stop_threshold = cfg.real("grad_stop");
    c.wolfe.c1 = cfg.real("c1");
    c.wolfe.c2 = cfg.real("c2");
    c.wolfe.alpha_init = cfg.real("alpha_init");
    c.wolfe.alpha_min = cfg.real("alpha_min");
    c.wolfe.max_backtracks = cfg.count("max_backtracks");
    c.seed = cfg.u64("seed");
    const std::string& opt = cfg.str("optimizer");
    if (opt == "lbfgs")
        c.optimizer = OptimizerKind::lbfgs;
    else if (opt == "sgd")
        c.optimizer = OptimizerKind::sgd;
    else
        throw ConfigError("optimizer: expected lbfgs or sgd, got '" + opt + "'");
    c.sgd_learning_rate = cfg.real("lr");
    c.sgd_batch_size = cfg.count("sgd_batch");
    c.sgd_update_frequency = cfg.count("sgd_freq");
    as_config([&] { c.validate(); });
    return c;
}

int cmd_train(const ResolvedConfig& cfg, std::ostream& out) {
    const GridWorld env = environment_from(cfg);
    const NetworkSpec spec = network_from(cfg, env);
    const TrainConfig config = train_config_from(cfg);
    const bool wall = cfg.boolean("log_wall_time");
    const fs::path dir = cfg.str("out");

    std::optional<TabularQ> oracle;
    if (config.discount < 1.0) oracle = value_iteration(env, config.discount, 1e-10);

    TrainOptions options;
    options.oracle = oracle ? &*oracle : nullptr;
    options.record_wall_time = wall;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainRun run = train(config, env, spec, options);
    const double wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    std::size_t unit_steps = 0, wolfe_ok = 0, floor_hits = 0, accepted = 0, resets = 0;
    for (const auto& r : run.records) {
        unit_steps += r.alpha == 1.0;
        wolfe_ok += r.wolfe_satisfied;
        floor_hits += r.floor_hit;
        accepted += r.pair_accepted;
        resets += r.direction_reset;
    }
    const double steps = static_cast<double>(std::max<std::size_t>(run.records.size(), 1));

    ordered_json summary;
    ordered_json effective = config_json(cfg);
    ordered_json layers = ordered_json::array();
    for (std::size_t s : spec.layer_sizes) layers.push_back(s);
    effective["layers"] = layers;
    summary["config"] = effective;
    summary["stop_reason"] = stop_reason_name(run.stop_reason);
    summary["optimization_steps"] = run.records.size();
    summary["env_steps"] = run.env_steps;
    summary["episodes"] = run.episodes;
    summary["wall_time_ms"] = wall_ms;
    summary["final_test_score"] = run.last_test_score ? ordered_json(*run.last_test_score) : ordered_json(nullptr);
    summary["final_loss"] = run.records.empty() ? ordered_json(nullptr) : ordered_json(run.records.back().loss);
    summary["alpha_one_fraction"] = static_cast<double>(unit_steps) / steps;
    summary["wolfe_satisfied_fraction"] = static_cast<double>(wolfe_ok) / steps;
    summary["floor_hits"] = floor_hits;
    summary["pairs_accepted"] = accepted;
    summary["direction_resets"] = resets;
    if (oracle) {
        summary["initial_q_gap"] = q_optimality_gap(spec, run.initial_weights, *oracle, env);
        summary["final_q_gap"] = q_optimality_gap(spec, run.final_weights, *oracle, env);
        summary["policy_agreement"] = policy_agreement(spec, run.final_weights, *oracle, env);
    }

    prepare_output_dir(dir);
    write_train_log(dir / "train_log.csv", run.records);
    write_checkpoint(dir / "checkpoint.bin", run.final_weights);
    write_json(dir / "summary.json", summary);

    out << "train: " << run.records.size() << " optimization steps, " << run.env_steps << " env steps, stop "
        << stop_reason_name(run.stop_reason);
    if (oracle) out << ", policy agreement " << fixed(summary["policy_agreement"].get<double>(), 3);
    out << "\n";
    return kExitOk;
}

int cmd_oracle(const ResolvedConfig& cfg, std::ostream& out) {
    const GridWorld env = environment_from(cfg);
    const double gamma = cfg.real("gamma");
    const double tol = cfg.real("tol");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma: value iteration needs 0 <= gamma < 1");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    const double threshold = cfg.real("gap_threshold");
    std::optional<ParamVector> weights;
    NetworkSpec spec;
    if (!cfg.str("checkpoint").empty()) {
        const fs::path ckpt = cfg.str("checkpoint");
        if (!fs::is_regular_file(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
        spec = network_from(cfg, env);
        weights = as_config([&] { return read_checkpoint(ckpt); });
        if (weights->size() != num_params(spec))
            throw ConfigError("checkpoint holds " + std::to_string(weights->size()) + " parameters but the network has " +
                              std::to_string(num_params(spec)));
    }
    const fs::path dir = cfg.str("out");

    const TabularQ q = value_iteration(env, gamma, tol);
    ordered_json summary;
    summary["config"] = config_json(cfg);
    summary["max_abs_q"] = q.max_abs();
    prepare_output_dir(dir);
    write_qstar_csv(dir / "qstar.csv", env, q);
    out << "oracle: wrote " << env.num_cells() * kNumActions << " rows to " << (dir / "qstar.csv").string() << "\n";
    if (weights) {
        const double gap = q_optimality_gap(spec, *weights, q, env);
        summary["q_gap"] = gap;
        summary["below_threshold"] = gap < threshold;
        summary["policy_agreement"] = policy_agreement(spec, *weights, q, env);
        out << "gap " << format_double(gap) << (gap < threshold ? " (below threshold)" : "") << "\n";
    }
    write_json(dir / "oracle_summary.json", summary);
    return kExitOk;
}

int cmd_bench_quadratic(const ResolvedConfig& cfg, std::ostream& out) {
    ConvexBenchSettings s;
    const std::string& opt = cfg.str("optimizer");
    if (opt == "lbfgs-fixed-alpha")
        s.optimizer = BenchOptimizer::lbfgs_fixed_alpha;
    else if (opt == "lbfgs-line-search")
        s.optimizer = BenchOptimizer::lbfgs_line_search;
    else if (opt == "lbfgs-exact")
        s.optimizer = BenchOptimizer::lbfgs_exact;
    else if (opt == "sgd")
        s.optimizer = BenchOptimizer::sgd;
    else
        throw ConfigError("optimizer: unknown bench optimizer '" + opt + "'");
    s.alpha = cfg.real("alpha");
    s.memory = cfg.count("m");
    s.iterations = cfg.count("iterations");
    s.batch_fraction = cfg.real("batch_fraction");
    s.start_distance = cfg.real("start_distance");
    const std::size_t n = cfg.count("n");
    const double lambda = cfg.real("lambda");
    const double Lambda = cfg.real("Lambda");
    const std::size_t partitions = cfg.count("partitions");
    const double noise = cfg.real("noise");
    const std::uint64_t seed0 = cfg.u64("seed");
    const std::size_t runs = cfg.count("runs");
    if (runs == 0) throw ConfigError("runs must be positive");
    if (!(s.alpha > 0.0) || !(s.batch_fraction > 0.0) || s.memory == 0)
        throw ConfigError("alpha and batch_fraction must be positive, m at least 1");
    const fs::path dir = cfg.str("out");

    std::vector<QuadraticProblem> problems;
    for (std::size_t r = 0; r < runs; ++r)
        problems.push_back(as_config([&] { return make_quadratic(seed0 + r, n, lambda, Lambda, partitions, noise); }));

    ordered_json summary;
    summary["config"] = config_json(cfg);
    ordered_json per_run = ordered_json::array();
    std::size_t violations = 0;
    std::vector<std::pair<ConvexBenchTrace, BoundCheck>> results;
    for (std::size_t r = 0; r < runs; ++r) {
        s.seed = seed0 + r;
        ConvexBenchTrace trace = run_convex_bench(problems[r], s);
        const BoundConstants c = trace.constants(problems[r], s.alpha);
        const BoundCheck check = as_config([&] { return check_theorem1(trace, c); });
        violations += check.violations;
        per_run.push_back({{"seed", s.seed},
                           {"violations", check.violations},
                           {"worst_gap_to_bound", check.worst_ratio},
                           {"initial_gap", trace.gaps.front()},
                           {"final_gap", trace.gaps.back()},
                           {"eta", trace.eta},
                           {"lambda_p", trace.lambda_p},
                           {"Lambda_p", trace.Lambda_p},
                           {"residual", theorem1_residual(c)}});
        results.emplace_back(std::move(trace), check);
    }
    summary["runs"] = per_run;
    summary["violations"] = violations;

    prepare_output_dir(dir);
    for (std::size_t r = 0; r < runs; ++r)
        write_bench_csv(dir / ("quadratic_seed" + std::to_string(seed0 + r) + ".csv"), results[r].first,
                        results[r].second);
    write_json(dir / "bench_summary.json", summary);
    out << "bench quadratic: " << runs << " runs, violations = " << violations << "\n";
    return violations == 0 ? kExitOk : kExitNumerical;
}

int cmd_bench_rosenbrock(const ResolvedConfig& cfg, std::ostream& out) {
    MinimizeSettings s;
    s.memory = cfg.count("m");
    s.max_iterations = cfg.count("max_iterations");
    s.grad_tol = cfg.real("grad_tol");
    s.wolfe.alpha_min = cfg.real("alpha_min");
    s.alpha_max = cfg.real("alpha_max");
    if (!(s.alpha_max >= s.wolfe.alpha_init)) throw ConfigError("alpha_max must be at least 1");
    if (s.memory == 0) throw ConfigError("m must be at least 1");
    as_config([&] { s.wolfe.validate(); });
    const ParamVector x0{cfg.real("x0"), cfg.real("y0")};
    const fs::path dir = cfg.str("out");

    const SmoothObjective rosen = [](std::span<const double> x, std::span<double> g) {
        const RosenbrockValue v = rosenbrock_eval(x);
        g[0] = v.g[0];
        g[1] = v.g[1];
        return v.f;
    };
    const MinimizeResult r = minimize_lbfgs(rosen, x0, s);

    std::string csv = "iteration,f,grad_norm\n";
    for (std::size_t k = 0; k < r.f_history.size(); ++k)
        csv += std::to_string(k) + ',' + format_double(r.f_history[k]) + ',' + format_double(r.grad_norm_history[k]) +
               '\n';
    ordered_json summary;
    summary["config"] = config_json(cfg);
    summary["converged"] = r.converged;
    summary["iterations"] = r.iterations;
    summary["evaluations"] = r.evaluations;
    summary["x"] = r.x;
    summary["f"] = r.f;
    summary["grad_norm"] = r.grad_norm;
    prepare_output_dir(dir);
    write_text_file(dir / "rosenbrock.csv", csv);
    write_json(dir / "rosenbrock_summary.json", summary);
    out << "bench rosenbrock: converged = " << (r.converged ? "true" : "false") << ", iterations = " << r.iterations
        << ", |g| = " << format_double(r.grad_norm) << "\n";
    return r.converged ? kExitOk : kExitNumerical;
}

int cmd_bench_cost_ratio(const ResolvedConfig& cfg, std::ostream& out) {
    const double ratio = as_config(
        [&] { return cost_ratio(cfg.real("f"), cfg.real("z"), cfg.real("bs"), cfg.real("b"), cfg.real("m")); });
    out << fixed(ratio, 2) << "\n";
    out << "cost_ratio = " << format_double(ratio) << "\n";
    return kExitOk;
}

namespace {

struct CommandFlags {
    const std::vector<KeySpec>* keys = nullptr;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;
    std::string config_file;
    CLI::Option* config_opt = nullptr;

    void attach(CLI::App* cmd, const std::vector<KeySpec>& k) {
        keys = &k;
        config_opt = cmd->add_option("--config", config_file, "flat key = value configuration file");
        for (const auto& spec : k) {
            std::string help = spec.help;
            if (!spec.default_value.empty()) help += " [" + spec.default_value + "]";
            options[spec.name] = cmd->add_option("--" + spec.name, raw[spec.name], help);
        }
    }

    ResolvedConfig resolve() const {
        std::map<std::string, std::string> given;
        for (const auto& [name, opt] : options)
            if (opt->count() > 0) given[name] = raw.at(name);
        std::optional<fs::path> file;
        if (config_opt->count() > 0) file = config_file;
        return ResolvedConfig(*keys, file, given);
    }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-batch line-search L-BFGS for deep Q-learning"};
    app.require_subcommand(1);

    CommandFlags train_flags, oracle_flags, quad_flags, rosen_flags, cost_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train a Q-network on a gridworld");
    train_flags.attach(train_cmd, train_keys());
    CLI::App* oracle_cmd = app.add_subcommand("oracle", "solve for Q* by value iteration");
    oracle_flags.attach(oracle_cmd, oracle_keys());
    CLI::App* bench_cmd = app.add_subcommand("bench", "convex and smoke-test benchmarks");
    bench_cmd->require_subcommand(1);
    CLI::App* quad_cmd = bench_cmd->add_subcommand("quadratic", "convergence bound check on a quadratic");
    quad_flags.attach(quad_cmd, bench_quadratic_keys());
    CLI::App* rosen_cmd = bench_cmd->add_subcommand("rosenbrock", "line-search L-BFGS on Rosenbrock");
    rosen_flags.attach(rosen_cmd, bench_rosenbrock_keys());
    CLI::App* cost_cmd = bench_cmd->add_subcommand("cost-ratio", "L-BFGS vs SGD runtime cost ratio");
    cost_flags.attach(cost_cmd, bench_cost_ratio_keys());

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_flags.resolve(), out);
        if (oracle_cmd->parsed()) return cmd_oracle(oracle_flags.resolve(), out);
        if (quad_cmd->parsed()) return cmd_bench_quadratic(quad_flags.resolve(), out);
        if (rosen_cmd->parsed()) return cmd_bench_rosenbrock(rosen_flags.resolve(), out);
        if (cost_cmd->parsed()) return cmd_bench_cost_ratio(cost_flags.resolve(), out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidInput& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    err << "error: no command given\n";
    return kExitConfig;
}

}  // namespace qnrl::app
