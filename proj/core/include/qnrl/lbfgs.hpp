#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "qnrl/vector_ops.hpp"

namespace qnrl {

/// One displacement / gradient-difference pair with s'y cached.
struct CurvaturePair {
    ParamVector s;
    ParamVector y;
    double sy = 0.0;
};

/// The m most recent accepted curvature pairs, oldest first.
///
/// A pair is accepted only when s'y > kCurvatureEps * |s| * |y|, which keeps
/// every implied inverse-Hessian approximation positive definite.
class LbfgsMemory {
public:
    static constexpr double kCurvatureEps = 1e-8;

    LbfgsMemory(std::size_t capacity, std::size_t dim);

    std::size_t capacity() const { return capacity_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return pairs_.size(); }
    bool empty() const { return pairs_.empty(); }
    const std::deque<CurvaturePair>& pairs() const { return pairs_; }
    const CurvaturePair& latest() const { return pairs_.back(); }

    /// In-place form of push_pair. Returns whether the pair was stored.
    bool push(ParamVector s, ParamVector y);

    friend bool operator==(const LbfgsMemory&, const LbfgsMemory&) = default;

private:
    std::size_t capacity_;
    std::size_t dim_;
    std::deque<CurvaturePair> pairs_;
};

inline bool operator==(const CurvaturePair& a, const CurvaturePair& b) {
    return a.s == b.s && a.y == b.y && a.sy == b.sy;
}

struct PushResult {
    LbfgsMemory memory;
    bool accepted;
};

/// Returns `mem` with (s, y) appended when the curvature test passes, evicting
/// the oldest pair past capacity. A rejected pair leaves the memory untouched.
PushResult push_pair(LbfgsMemory mem, ParamVector s, ParamVector y);

/// y's / y'y of the newest pair, or 1 when the memory is empty.
double gamma_scaling(const LbfgsMemory& mem);

/// H g via the two-loop recursion with H0 = gamma_scaling(mem) * I.
ParamVector two_loop(const LbfgsMemory& mem, std::span<const double> g);

/// H g with an explicit initial scaling H0 = gamma * I.
ParamVector two_loop(const LbfgsMemory& mem, std::span<const double> g, double gamma);

/// -H g.
ParamVector search_direction(const LbfgsMemory& mem, std::span<const double> g);

/// Row-major dense square matrix; only used by test oracles and small benches.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> data;

    explicit DenseMatrix(std::size_t size, double diag = 0.0);
    double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    std::vector<double> multiply(std::span<const double> v) const;
};

inline constexpr std::size_t kDenseOracleMaxDim = 64;

/// Explicit inverse-Hessian approximation built by applying the BFGS inverse
/// update H <- (I - rho s y') H (I - rho y s') + rho s s' once per stored pair,
/// oldest first, from H0 = gamma I. `gamma` defaults to gamma_scaling(mem).
/// Throws Unsupported for n > kDenseOracleMaxDim.
DenseMatrix dense_inverse_hessian(const LbfgsMemory& mem, std::size_t n,
                                  std::optional<double> gamma = std::nullopt);

}  // namespace qnrl
