#include "qnrl/linesearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "qnrl/errors.hpp"

namespace qnrl {

void WolfeParams::validate() const {
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw InvalidInput("WolfeParams: need 0 < c1 < c2 < 1");
    if (!(0.0 < alpha_min && alpha_min <= alpha_init && alpha_init <= 1.0))
        throw InvalidInput("WolfeParams: need 0 < alpha_min <= alpha_init <= 1");
}

WolfeVerdict wolfe_check(double f0, double g0p, double f_alpha, double g_alpha_p, double alpha, double c1,
                         double c2) {
    if (!(g0p < 0.0)) throw NotDescentDirection("wolfe_check: directional derivative is not negative");
    return {f_alpha <= f0 + c1 * alpha * g0p, g_alpha_p >= c2 * g0p};
}

LineSearchResult line_search(const LineObjective& phi, double f0, double g0p, const WolfeParams& params) {
    params.validate();
    if (!(g0p < 0.0)) throw NotDescentDirection("line_search: directional derivative is not negative");

    LineSearchResult result;
    double alpha = params.alpha_init;
    bool any_finite = false;
    for (std::size_t trial = 0;; ++trial) {
        const LinePoint p = phi(alpha);
        ++result.f_evals;
        ++result.g_evals;
        result.alpha = alpha;
        result.at_alpha = p;
        const bool finite = std::isfinite(p.value) && std::isfinite(p.slope);
        any_finite = any_finite || finite;
        if (finite && wolfe_check(f0, g0p, p.value, p.slope, alpha, params.c1, params.c2).both()) {
            result.wolfe_satisfied = true;
            return result;
        }
        if (alpha <= params.alpha_min || trial >= params.max_backtracks) break;
        alpha = std::max(alpha / 2.0, params.alpha_min);
    }
    if (!any_finite) throw LineSearchFailure("line_search: objective was non-finite at every trial step");
    result.floor_hit = true;
    return result;
}

LineSearchResult bisection_line_search(const LineObjective& phi, double f0, double g0p, const WolfeParams& params,
                                       double alpha_max) {
    params.validate();
    if (!(alpha_max >= params.alpha_init)) throw InvalidInput("bisection_line_search: alpha_max < alpha_init");
    if (!(g0p < 0.0)) throw NotDescentDirection("bisection_line_search: directional derivative is not negative");

    LineSearchResult result;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double alpha = params.alpha_init;
    bool any_finite = false;
    std::optional<std::pair<double, LinePoint>> best_lo;
    for (std::size_t trial = 0; trial <= params.max_backtracks; ++trial) {
        const LinePoint p = phi(alpha);
        ++result.f_evals;
        ++result.g_evals;
        const bool finite = std::isfinite(p.value) && std::isfinite(p.slope);
        any_finite = any_finite || finite;
        const WolfeVerdict v = finite ? wolfe_check(f0, g0p, p.value, p.slope, alpha, params.c1, params.c2)
                                      : WolfeVerdict{false, false};
        if (v.both()) {
            result.alpha = alpha;
            result.at_alpha = p;
            result.wolfe_satisfied = true;
            return result;
        }
        if (!v.sufficient_decrease) {
            hi = alpha;
        } else {
            lo = alpha;
            best_lo = {alpha, p};
            if (alpha >= alpha_max) break;
        }
        alpha = std::isfinite(hi) ? 0.5 * (lo + hi) : std::min(2.0 * lo, alpha_max);
        if (alpha < params.alpha_min) break;
    }
    if (!any_finite) throw LineSearchFailure("bisection_line_search: objective was non-finite at every trial step");
    result.floor_hit = true;
    if (best_lo) {
        result.alpha = best_lo->first;
        result.at_alpha = best_lo->second;
    } else {
        result.alpha = params.alpha_min;
        result.at_alpha = phi(params.alpha_min);
        ++result.f_evals;
        ++result.g_evals;
    }
    return result;
}

}  // namespace qnrl
