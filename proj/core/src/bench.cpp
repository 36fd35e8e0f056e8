#include "qnrl/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qnrl/errors.hpp"
#include "qnrl/rng.hpp"

namespace qnrl {

double QuadraticProblem::gap(std::span<const double> w) const {
    const ParamVector e = subtract(w, w_star);
    return 0.5 * dot(e, A.multiply(e));
}

ParamVector QuadraticProblem::full_gradient(std::span<const double> w) const {
    return A.multiply(subtract(w, w_star));
}

ParamVector QuadraticProblem::batch_gradient(std::span<const double> w, std::span<const std::size_t> batch) const {
    if (batch.empty()) throw InvalidInput("batch_gradient: empty batch");
    ParamVector mean(n, 0.0);
    for (std::size_t j : batch) axpy(1.0, centers.at(j), mean);
    scale(1.0 / static_cast<double>(batch.size()), mean);
    return A.multiply(subtract(w, mean));
}

QuadraticProblem make_quadratic(std::uint64_t seed, std::size_t n, double lambda, double Lambda,
                                std::size_t partitions, double noise) {
    if (n < 2) throw InvalidInput("make_quadratic: n must be at least 2");
    if (!(lambda > 0.0 && lambda <= Lambda && std::isfinite(Lambda)))
        throw InvalidInput("make_quadratic: need 0 < lambda <= Lambda");
    if (partitions == 0) throw InvalidInput("make_quadratic: partitions must be positive");
    if (!(noise >= 0.0)) throw InvalidInput("make_quadratic: noise must be non-negative");

    Rng rng(seed);
    QuadraticProblem p;
    p.n = n;
    p.lambda = lambda;
    p.Lambda = Lambda;
    p.eigenvalues.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        p.eigenvalues[i] = i + 1 == n ? Lambda : lambda + (Lambda - lambda) * static_cast<double>(i) / (n - 1);

    p.A = DenseMatrix(n, lambda);
    if (lambda != Lambda) {
        Eigen::MatrixXd g(n, n);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = standard_normal(rng);
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
        const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(p.eigenvalues.data(), n);
        const Eigen::MatrixXd a = q * d.asDiagonal() * q.transpose();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p.A(i, j) = 0.5 * (a(i, j) + a(j, i));
    }

    p.w_star.resize(n);
    for (double& v : p.w_star) v = standard_normal(rng);
    p.b_vec = p.A.multiply(p.w_star);

    std::vector<ParamVector> offsets(partitions, ParamVector(n));
    ParamVector mean(n, 0.0);
    for (auto& d : offsets) {
        for (double& v : d) v = noise * standard_normal(rng);
        axpy(1.0 / static_cast<double>(partitions), d, mean);
    }
    p.centers.reserve(partitions);
    for (auto& d : offsets) {
        axpy(-1.0, mean, d);
        p.centers.push_back(add_scaled(p.w_star, 1.0, d));
    }
    return p;
}

void BoundConstants::validate() const {
    if (!(lambda > 0.0 && Lambda > 0.0 && lambda_p > 0.0 && Lambda_p > 0.0 && eta > 0.0 && alpha > 0.0))
        throw InvalidInput("BoundConstants: all constants must be positive");
    if (lambda > Lambda) throw InvalidInput("BoundConstants: lambda must not exceed Lambda");
    if (lambda_p > Lambda_p) throw InvalidInput("BoundConstants: lambda' must not exceed Lambda'");
    if (!(alpha < 1.0 / (2.0 * lambda * lambda_p)))
        throw InvalidInput("BoundConstants: alpha must lie in (0, 1 / (2 lambda lambda'))");
}

double theorem1_residual(const BoundConstants& c) {
    return c.alpha * c.alpha * c.Lambda_p * c.Lambda_p * c.Lambda * c.eta * c.eta / (4.0 * c.lambda_p * c.lambda);
}

double theorem1_bound(std::size_t k, double gap0, const BoundConstants& c) {
    c.validate();
    const double rho = 1.0 - 2.0 * c.alpha * c.lambda * c.lambda_p;
    const double rk = std::pow(rho, static_cast<double>(k));
    return rk * gap0 + (1.0 - rk) * theorem1_residual(c);
}

const char* bench_optimizer_name(BenchOptimizer o) {
    switch (o) {
        case BenchOptimizer::lbfgs_fixed_alpha: return "lbfgs-fixed-alpha";
        case BenchOptimizer::lbfgs_line_search: return "lbfgs-line-search";
        case BenchOptimizer::lbfgs_exact: return "lbfgs-exact";
        case BenchOptimizer::sgd: return "sgd";
    }
    return "?";
}

BoundConstants ConvexBenchTrace::constants(const QuadraticProblem& p, double alpha) const {
    return BoundConstants{p.lambda, p.Lambda, lambda_p, Lambda_p, eta, alpha};
}

namespace {

std::vector<std::size_t> sample_batch(Rng& rng, std::size_t partitions, double fraction) {
    std::vector<std::size_t> idx(partitions);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (fraction >= 1.0) return idx;
    const auto size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(partitions))));
    for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + uniform_index(rng, partitions - i)]);
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

ConvexBenchTrace run_convex_bench(const QuadraticProblem& problem, const ConvexBenchSettings& settings) {
    if (!(settings.alpha > 0.0)) throw InvalidInput("run_convex_bench: alpha must be positive");
    if (!(settings.batch_fraction > 0.0)) throw InvalidInput("run_convex_bench: batch_fraction must be positive");
    if (settings.optimizer == BenchOptimizer::lbfgs_line_search) settings.wolfe.validate();

    const std::size_t n = problem.n;
    Rng rng(settings.seed);
    ParamVector w(n);
    for (double& v : w) v = standard_normal(rng);
    scale(settings.start_distance / norm2(w), w);
    axpy(1.0, problem.w_star, w);

    const bool quasi_newton = settings.optimizer != BenchOptimizer::sgd;
    LbfgsMemory mem(std::max<std::size_t>(settings.memory, 1), n);
    ConvexBenchTrace trace;
    trace.lambda_p = quasi_newton ? std::numeric_limits<double>::infinity() : 1.0;
    trace.Lambda_p = quasi_newton ? 0.0 : 1.0;
    const double gap0 = problem.gap(w);
    trace.gaps.push_back(gap0);

    auto observe_rayleigh = [&](std::span<const double> v) {
        const double vv = dot(v, v);
        if (vv == 0.0) return;
        const double rq = dot(v, two_loop(mem, v)) / vv;
        trace.lambda_p = std::min(trace.lambda_p, rq);
        trace.Lambda_p = std::max(trace.Lambda_p, rq);
    };

    for (std::size_t k = 0; k < settings.iterations; ++k) {
        const std::vector<std::size_t> batch = sample_batch(rng, problem.partitions(), settings.batch_fraction);
        const bool full = settings.batch_fraction >= 1.0;
        const ParamVector g = full ? problem.full_gradient(w) : problem.batch_gradient(w, batch);
        const double gnorm = norm2(g);
        trace.grad_norms.push_back(gnorm);
        trace.eta = std::max(trace.eta, gnorm);

        ParamVector p;
        double alpha = settings.alpha;
        if (quasi_newton) {
            observe_rayleigh(g);
            ParamVector probe(n);
            for (std::size_t r = 0; r < settings.probes; ++r) {
                for (double& v : probe) v = standard_normal(rng);
                observe_rayleigh(probe);
            }
            p = search_direction(mem, g);
        } else {
            p = g;
            scale(-1.0, p);
        }

        auto grad_at = [&](std::span<const double> x) {
            return full ? problem.full_gradient(x) : problem.batch_gradient(x, batch);
        };

        if (settings.optimizer == BenchOptimizer::lbfgs_line_search && gnorm > 0.0) {
            // Minibatch objective along p, shifted so phi(0) is the current value.
            const ParamVector ap = problem.A.multiply(p);
            const double curv = dot(p, ap);
            const double slope0 = dot(g, p);
            const LineObjective phi = [&](double a) {
                return LinePoint{slope0 * a + 0.5 * curv * a * a, slope0 + curv * a};
            };
            const LineSearchResult ls = bisection_line_search(phi, 0.0, slope0, settings.wolfe);
            alpha = ls.alpha;
            if (!ls.wolfe_satisfied) ++trace.wolfe_failures;
        } else if (settings.optimizer == BenchOptimizer::lbfgs_exact && gnorm > 0.0) {
            // Exact minimizer of the minibatch quadratic along p.
            alpha = -dot(g, p) / dot(p, problem.A.multiply(p));
        }
        trace.alphas.push_back(alpha);

        ParamVector w_next = add_scaled(w, alpha, p);
        if (quasi_newton) {
            ParamVector s = subtract(w_next, w);
            ParamVector y = subtract(grad_at(w_next), g);
            mem.push(std::move(s), std::move(y));
        }
        w = std::move(w_next);
        const double gap = problem.gap(w);
        if (!std::isfinite(gap) || gap > 1e6 * gap0)
            throw Diverged("run_convex_bench: gap exceeded 1e6 times its initial value at iteration " +
                           std::to_string(k + 1));
        trace.gaps.push_back(gap);
    }
    return trace;
}

BoundCheck check_theorem1(const ConvexBenchTrace& trace, const BoundConstants& c) {
    BoundCheck out;
    const double gap0 = trace.gaps.front();
    for (std::size_t k = 0; k < trace.gaps.size(); ++k) {
        const double bound = theorem1_bound(k, gap0, c);
        out.bounds.push_back(bound);
        if (trace.gaps[k] > bound * (1.0 + 1e-9)) ++out.violations;
        if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, trace.gaps[k] / bound);
    }
    return out;
}

double cost_ratio(double f, double z, double b_s, double b, double m) {
    if (!(f > 0.0 && z > 0.0 && b_s > 0.0 && b > 0.0 && m >= 0.0))
        throw InvalidInput("cost_ratio: f, z, b_s, b must be positive and m non-negative");
    return f * z / b_s + 4.0 * f * m / (b * b_s);
}

RosenbrockValue rosenbrock_eval(std::span<const double> w) {
    if (w.size() != 2) throw InvalidInput("rosenbrock_eval: expects a 2-vector");
    const double a = 1.0 - w[0];
    const double b = w[1] - w[0] * w[0];
    return {a * a + 100.0 * b * b, {-2.0 * a - 400.0 * w[0] * b, 200.0 * b}};
}

MinimizeResult minimize_lbfgs(const SmoothObjective& objective, ParamVector x0, const MinimizeSettings& settings) {
    settings.wolfe.validate();
    const std::size_t n = x0.size();
    MinimizeResult out;
    LbfgsMemory mem(settings.memory, n);
    ParamVector x = std::move(x0);
    ParamVector g(n);
    double f = objective(x, g);
    ++out.evaluations;

    for (;;) {
        if (!std::isfinite(f) || !all_finite(g)) throw Diverged("minimize_lbfgs: non-finite objective");
        out.f_history.push_back(f);
        out.grad_norm = norm2(g);
        out.grad_norm_history.push_back(out.grad_norm);
        if (out.grad_norm < settings.grad_tol) {
            out.converged = true;
            break;
        }
        if (out.iterations >= settings.max_iterations) break;

        ParamVector p = search_direction(mem, g);
        double slope = dot(g, p);
        if (!(slope < 0.0)) {
            mem = LbfgsMemory(settings.memory, n);
            p = search_direction(mem, g);
            slope = dot(g, p);
        }
        ParamVector g_trial(n);
        double last_alpha = -1.0;
        const LineObjective phi = [&](double a) {
            const double fa = objective(add_scaled(x, a, p), g_trial);
            last_alpha = a;
            return LinePoint{fa, dot(g_trial, p)};
        };
        const LineSearchResult ls = bisection_line_search(phi, f, slope, settings.wolfe, settings.alpha_max);
        out.evaluations += ls.f_evals;
        ParamVector x_next = add_scaled(x, ls.alpha, p);
        ParamVector g_last = g_trial;
        if (last_alpha != ls.alpha) {
            objective(x_next, g_last);
            ++out.evaluations;
        }
        mem.push(subtract(x_next, x), subtract(g_last, g));
        x = std::move(x_next);
        g = std::move(g_last);
        f = ls.at_alpha.value;
        ++out.iterations;
    }
    out.x = std::move(x);
    out.f = f;
    return out;
}

}  // namespace qnrl
