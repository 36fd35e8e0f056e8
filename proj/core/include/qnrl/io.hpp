#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qnrl/bench.hpp"
#include "qnrl/gridworld.hpp"
#include "qnrl/trainer.hpp"
#include "qnrl/vector_ops.hpp"

namespace qnrl {

// Checkpoint layout, all little-endian:
//   bytes 0..3   "QNRL"
//   bytes 4..7   u32 version
//   bytes 8..15  u64 parameter count n
//   then n float64 values
inline constexpr char kCheckpointMagic[4] = {'Q', 'N', 'R', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 16;

std::string encode_checkpoint(std::span<const double> w);
/// Throws InvalidInput on a bad magic, version or length.
ParamVector decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, std::span<const double> w);
ParamVector read_checkpoint(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

/// Column names of train_log.csv in record order.
const std::vector<std::string>& train_log_columns();
std::string train_log_header();
std::string format_log_row(const TrainLogRecord& rec);
void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRecord>& records);

/// state_x,state_y,action,q for every cell and action.
void write_qstar_csv(const std::filesystem::path& path, const GridWorld& env, const TabularQ& q);

/// iteration,gap,bound,alpha,grad_norm
void write_bench_csv(const std::filesystem::path& path, const ConvexBenchTrace& trace, const BoundCheck& check);

void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace qnrl
