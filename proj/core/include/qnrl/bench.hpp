#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qnrl/lbfgs.hpp"
#include "qnrl/linesearch.hpp"
#include "qnrl/vector_ops.hpp"

namespace qnrl {

/// L(w) = 1/2 (w - w*)' A (w - w*), written as the mean over partitions j of
/// 1/2 (w - c_j)' A (w - c_j) minus a constant, with mean_j c_j = w*.
/// A minibatch of partitions B has gradient A (w - mean_{j in B} c_j).
struct QuadraticProblem {
    std::size_t n = 0;
    double lambda = 0.0;
    double Lambda = 0.0;
    DenseMatrix A{0};
    std::vector<double> eigenvalues;
    ParamVector b_vec;  // A w*
    ParamVector w_star;
    std::vector<ParamVector> centers;

    std::size_t partitions() const { return centers.size(); }
    double gap(std::span<const double> w) const;
    ParamVector full_gradient(std::span<const double> w) const;
    ParamVector batch_gradient(std::span<const double> w, std::span<const std::size_t> batch) const;
};

/// A = Q diag(eigs) Q' with Q a random orthogonal basis and eigs evenly spaced
/// over [lambda, Lambda] (both ends attained). Partition offsets are N(0, noise^2)
/// and centred so they average exactly to w*.
QuadraticProblem make_quadratic(std::uint64_t seed, std::size_t n, double lambda, double Lambda,
                                std::size_t partitions, double noise = 1.0);

struct BoundConstants {
    double lambda = 0.0;
    double Lambda = 0.0;
    double lambda_p = 0.0;  // lower bound on the spectrum of H_k
    double Lambda_p = 0.0;  // upper bound on the spectrum of H_k
    double eta = 0.0;       // gradient norm bound
    double alpha = 0.0;     // fixed step size

    void validate() const;
};

/// rho^k gap0 + (1 - rho^k) alpha^2 Lambda'^2 Lambda eta^2 / (4 lambda' lambda),
/// rho = 1 - 2 alpha lambda lambda'. Throws InvalidInput unless
/// alpha lies in (0, 1 / (2 lambda lambda')).
double theorem1_bound(std::size_t k, double gap0, const BoundConstants& c);

/// Residual term alpha^2 Lambda'^2 Lambda eta^2 / (4 lambda' lambda).
double theorem1_residual(const BoundConstants& c);

enum class BenchOptimizer { lbfgs_fixed_alpha, lbfgs_line_search, lbfgs_exact, sgd };

const char* bench_optimizer_name(BenchOptimizer o);

struct ConvexBenchSettings {
    BenchOptimizer optimizer = BenchOptimizer::lbfgs_fixed_alpha;
    double alpha = 0.4;
    std::size_t memory = 10;
    std::size_t iterations = 500;
    /// Share of partitions per minibatch; >= 1 means the exact full gradient.
    double batch_fraction = 0.25;
    std::uint64_t seed = 1;
    /// Random probes per iteration for the Rayleigh-quotient estimates of H_k.
    std::size_t probes = 4;
    /// Distance of w0 from w*.
    double start_distance = 10.0;
    /// Used by lbfgs_line_search; the RL step-size floor does not apply here.
    WolfeParams wolfe{1e-4, 0.9, 1.0, 1e-10, 60};
};

struct ConvexBenchTrace {
    std::vector<double> gaps;        // k = 0 .. iterations
    std::vector<double> grad_norms;  // per iteration, stochastic gradient used
    std::vector<double> alphas;      // per iteration
    double eta = 0.0;
    double lambda_p = 0.0;
    double Lambda_p = 0.0;
    std::size_t wolfe_failures = 0;

    BoundConstants constants(const QuadraticProblem& p, double alpha) const;
};

/// Runs the optimizer on the quadratic with minibatch gradients. For L-BFGS
/// each pair uses the same minibatch at both iterates. Throws Diverged when the
/// gap exceeds 1e6 times its initial value.
ConvexBenchTrace run_convex_bench(const QuadraticProblem& problem, const ConvexBenchSettings& settings);

struct BoundCheck {
    std::size_t violations = 0;
    double worst_ratio = 0.0;  // max over k of gap_k / bound_k
    std::vector<double> bounds;
};

/// Compares every logged gap with theorem1_bound(k) * (1 + 1e-9).
BoundCheck check_theorem1(const ConvexBenchTrace& trace, const BoundConstants& c);

/// f z / b_s + 4 f m / (b b_s)
double cost_ratio(double f, double z, double b_s, double b, double m);

struct RosenbrockValue {
    double f;
    std::array<double, 2> g;
};

RosenbrockValue rosenbrock_eval(std::span<const double> w);

/// f(x), writing grad f(x) into the second argument.
using SmoothObjective = std::function<double(std::span<const double>, std::span<double>)>;

struct MinimizeSettings {
    std::size_t memory = 10;
    std::size_t max_iterations = 200;
    double grad_tol = 1e-5;
    WolfeParams wolfe{1e-4, 0.9, 1.0, 1e-10, 60};
    /// Expansion limit. Capping at 1 can stall: a short step that fails the
    /// curvature condition yields a rejected pair and an unchanged memory.
    double alpha_max = 1e6;
};

struct MinimizeResult {
    ParamVector x;
    double f = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
    std::vector<double> f_history;
    std::vector<double> grad_norm_history;
};

/// Deterministic line-search L-BFGS built from two_loop and line_search.
MinimizeResult minimize_lbfgs(const SmoothObjective& objective, ParamVector x0, const MinimizeSettings& settings);

}  // namespace qnrl
