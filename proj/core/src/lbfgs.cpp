#include "qnrl/lbfgs.hpp"

#include <cmath>
#include <string>

#include "qnrl/errors.hpp"

namespace qnrl {

LbfgsMemory::LbfgsMemory(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
    if (capacity == 0) throw InvalidInput("LbfgsMemory: capacity must be positive");
}

bool LbfgsMemory::push(ParamVector s, ParamVector y) {
    require_same_size(s.size(), dim_, "push_pair s");
    require_same_size(y.size(), dim_, "push_pair y");
    if (!all_finite(s) || !all_finite(y)) return false;
    const double sy = dot(s, y);
    if (!(sy > kCurvatureEps * norm2(s) * norm2(y))) return false;
    pairs_.push_back(CurvaturePair{std::move(s), std::move(y), sy});
    if (pairs_.size() > capacity_) pairs_.pop_front();
    return true;
}

PushResult push_pair(LbfgsMemory mem, ParamVector s, ParamVector y) {
    const bool accepted = mem.push(std::move(s), std::move(y));
    return {std::move(mem), accepted};
}

double gamma_scaling(const LbfgsMemory& mem) {
    if (mem.empty()) return 1.0;
    const auto& p = mem.latest();
    return p.sy / dot(p.y, p.y);
}

ParamVector two_loop(const LbfgsMemory& mem, std::span<const double> g) {
    return two_loop(mem, g, gamma_scaling(mem));
}

ParamVector two_loop(const LbfgsMemory& mem, std::span<const double> g, double gamma) {
    require_same_size(g.size(), mem.dim(), "two_loop");
    const auto& pairs = mem.pairs();
    const std::size_t m = pairs.size();
    ParamVector q(g.begin(), g.end());
    std::vector<double> alpha(m);

    for (std::size_t i = m; i-- > 0;) {  // newest to oldest
        alpha[i] = dot(pairs[i].s, q) / pairs[i].sy;
        axpy(-alpha[i], pairs[i].y, q);
    }
    scale(gamma, q);
    for (std::size_t i = 0; i < m; ++i) {  // oldest to newest
        const double beta = dot(pairs[i].y, q) / pairs[i].sy;
        axpy(alpha[i] - beta, pairs[i].s, q);
    }
    return q;
}

ParamVector search_direction(const LbfgsMemory& mem, std::span<const double> g) {
    ParamVector r = two_loop(mem, g);
    scale(-1.0, r);
    return r;
}

DenseMatrix::DenseMatrix(std::size_t size, double diag) : n(size), data(size * size, 0.0) {
    for (std::size_t i = 0; i < n; ++i) data[i * n + i] = diag;
}

std::vector<double> DenseMatrix::multiply(std::span<const double> v) const {
    require_same_size(v.size(), n, "DenseMatrix::multiply");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out[i] = dot(std::span<const double>(data).subspan(i * n, n), v);
    return out;
}

DenseMatrix dense_inverse_hessian(const LbfgsMemory& mem, std::size_t n, std::optional<double> gamma) {
    if (n > kDenseOracleMaxDim)
        throw Unsupported("dense_inverse_hessian: n = " + std::to_string(n) + " exceeds " +
                          std::to_string(kDenseOracleMaxDim));
    require_same_size(n, mem.dim(), "dense_inverse_hessian");

    DenseMatrix h(n, gamma.value_or(gamma_scaling(mem)));
    for (const auto& p : mem.pairs()) {
        const double rho = 1.0 / p.sy;
        // V = I - rho y s'; H <- V' H V + rho s s'
        DenseMatrix v(n, 1.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) v(i, j) -= rho * p.y[i] * p.s[j];
        DenseMatrix hv(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) acc += h(i, k) * v(k, j);
                hv(i, j) = acc;
            }
        DenseMatrix next(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = rho * p.s[i] * p.s[j];
                for (std::size_t k = 0; k < n; ++k) acc += v(k, i) * hv(k, j);
                next(i, j) = acc;
            }
        h = std::move(next);
    }
    return h;
}

}  // namespace qnrl
