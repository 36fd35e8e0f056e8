#pragma once

#include <iosfwd>
#include <vector>

#include "qnrl/gridworld.hpp"
#include "qnrl/qnet.hpp"
#include "qnrl/trainer.hpp"
#include "qnrl_app/config.hpp"

namespace qnrl::app {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitIo = 3 };

const std::vector<KeySpec>& train_keys();
const std::vector<KeySpec>& oracle_keys();
const std::vector<KeySpec>& bench_quadratic_keys();
const std::vector<KeySpec>& bench_rosenbrock_keys();
const std::vector<KeySpec>& bench_cost_ratio_keys();

/// Built-in name ("gridworld6") or path to a grid file, plus reward overrides.
GridWorld environment_from(const ResolvedConfig& cfg);
/// `layers` when given, else default_network(env).
NetworkSpec network_from(const ResolvedConfig& cfg, const GridWorld& env);
TrainConfig train_config_from(const ResolvedConfig& cfg);

// Each command validates everything before writing any output and throws on
// failure; run_cli maps exceptions to exit codes.
int cmd_train(const ResolvedConfig& cfg, std::ostream& out);
int cmd_oracle(const ResolvedConfig& cfg, std::ostream& out);
int cmd_bench_quadratic(const ResolvedConfig& cfg, std::ostream& out);
int cmd_bench_rosenbrock(const ResolvedConfig& cfg, std::ostream& out);
int cmd_bench_cost_ratio(const ResolvedConfig& cfg, std::ostream& out);

/// Full entry point: parses argv, dispatches, maps errors to exit codes
/// (0 ok, 1 config, 2 numerical failure, 3 I/O).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qnrl::app
