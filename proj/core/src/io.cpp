#include "qnrl/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qnrl/errors.hpp"

namespace qnrl {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return value;
}

}  // namespace

std::string encode_checkpoint(std::span<const double> w) {
    std::string out;
    out.reserve(kCheckpointHeaderSize + 8 * w.size());
    out.append(kCheckpointMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, w.size());
    for (double v : w) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

ParamVector decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < kCheckpointHeaderSize) throw InvalidInput("checkpoint: truncated header");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw InvalidInput("checkpoint: bad magic");
    if (get_le<std::uint32_t>(bytes, 4) != kCheckpointVersion) throw InvalidInput("checkpoint: unsupported version");
    const auto n = get_le<std::uint64_t>(bytes, 8);
    if (bytes.size() != kCheckpointHeaderSize + 8 * n) throw InvalidInput("checkpoint: length does not match header");
    ParamVector w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, kCheckpointHeaderSize + 8 * i));
    return w;
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void write_checkpoint(const std::filesystem::path& path, std::span<const double> w) {
    write_text_file(path, encode_checkpoint(w));
}

ParamVector read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return decode_checkpoint(buf.str());
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

const std::vector<std::string>& train_log_columns() {
    static const std::vector<std::string> cols{
        "k",        "env_steps",  "loss",       "grad_norm", "alpha",     "wolfe_satisfied",
        "floor_hit", "pair_accepted", "epsilon", "f_evals",   "g_evals",   "test_score",
        "wall_ms",  "loss_next",  "directional_derivative", "direction_reset", "q_gap"};
    return cols;
}

std::string train_log_header() {
    std::string h;
    for (const auto& c : train_log_columns()) {
        if (!h.empty()) h += ',';
        h += c;
    }
    return h;
}

std::string format_log_row(const TrainLogRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
    const std::vector<std::string> fields{
        std::to_string(r.k),          std::to_string(r.env_steps),  format_double(r.loss),
        format_double(r.grad_norm),   format_double(r.alpha),       flag(r.wolfe_satisfied),
        flag(r.floor_hit),            flag(r.pair_accepted),        format_double(r.epsilon),
        std::to_string(r.f_evals),    std::to_string(r.g_evals),    opt(r.test_score),
        opt(r.wall_ms),               format_double(r.loss_next),   format_double(r.directional_derivative),
        flag(r.direction_reset),      opt(r.q_gap)};
    std::string row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) row += ',';
        row += fields[i];
    }
    return row;
}

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRecord>& records) {
    std::string out = train_log_header() + '\n';
    for (const auto& r : records) out += format_log_row(r) + '\n';
    write_text_file(path, out);
}

void write_qstar_csv(const std::filesystem::path& path, const GridWorld& env, const TabularQ& q) {
    std::string out = "state_x,state_y,action,q\n";
    for (std::size_t s = 0; s < env.num_cells(); ++s) {
        const Cell c = env.cell(s);
        for (Action a : kAllActions) {
            out += std::to_string(c.x) + ',' + std::to_string(c.y) + ',' + action_name(a) + ',' +
                   format_double(q(s, static_cast<std::size_t>(a))) + '\n';
        }
    }
    write_text_file(path, out);
}

void write_bench_csv(const std::filesystem::path& path, const ConvexBenchTrace& trace, const BoundCheck& check) {
    std::string out = "iteration,gap,bound,alpha,grad_norm\n";
    for (std::size_t k = 0; k < trace.gaps.size(); ++k) {
        out += std::to_string(k) + ',' + format_double(trace.gaps[k]) + ',' +
               (k < check.bounds.size() ? format_double(check.bounds[k]) : std::string()) + ',' +
               (k < trace.alphas.size() ? format_double(trace.alphas[k]) : std::string()) + ',' +
               (k < trace.grad_norms.size() ? format_double(trace.grad_norms[k]) : std::string()) + '\n';
    }
    write_text_file(path, out);
}

}  // namespace qnrl
