#pragma once

#include <cstddef>
#include <functional>

namespace qnrl {

/// Weak Wolfe parameters. Step sizes are confined to [alpha_min, alpha_init].
struct WolfeParams {
    double c1 = 1e-4;
    double c2 = 0.9;
    double alpha_init = 1.0;
    double alpha_min = 0.1;
    std::size_t max_backtracks = 10;

    /// Throws InvalidInput unless 0 < c1 < c2 < 1 and 0 < alpha_min <= alpha_init <= 1.
    void validate() const;
};

struct WolfeVerdict {
    bool sufficient_decrease;
    bool curvature;
    bool both() const { return sufficient_decrease && curvature; }
};

/// phi(alpha) and phi'(alpha) along a search direction.
struct LinePoint {
    double value;
    double slope;
};

using LineObjective = std::function<LinePoint(double alpha)>;

struct LineSearchResult {
    double alpha = 0.0;
    std::size_t f_evals = 0;
    std::size_t g_evals = 0;
    bool wolfe_satisfied = false;
    /// No Wolfe point was found before the floor (or the backtrack budget) was reached.
    bool floor_hit = false;
    /// phi and phi' at the returned alpha.
    LinePoint at_alpha{0.0, 0.0};
};

/// sufficient_decrease: f_alpha <= f0 + c1 alpha g0p
/// curvature:           g_alpha_p >= c2 g0p
/// Throws NotDescentDirection when g0p >= 0.
WolfeVerdict wolfe_check(double f0, double g0p, double f_alpha, double g_alpha_p, double alpha, double c1,
                         double c2);

/// Backtracking search: alpha_init first, then alpha <- max(alpha / 2, alpha_min)
/// until the weak Wolfe conditions hold. If the floor is reached (or the budget
/// of max_backtracks halvings runs out) the last trial step is returned with
/// floor_hit set. Throws LineSearchFailure when phi was non-finite at every trial.
LineSearchResult line_search(const LineObjective& phi, double f0, double g0p, const WolfeParams& params);

/// Bisection search for a weak Wolfe point in [alpha_min, alpha_max], starting
/// at alpha_init. A step that fails sufficient decrease becomes the upper
/// bracket, one that fails curvature the lower bracket; the next trial is the
/// midpoint, or twice the lower bracket (capped at alpha_max) while no upper
/// bracket exists. Gives up after max_backtracks + 1 trials, returning the
/// lower bracket (or the floor) with floor_hit set.
LineSearchResult bisection_line_search(const LineObjective& phi, double f0, double g0p, const WolfeParams& params,
                                       double alpha_max = 1.0);

}  // namespace qnrl
