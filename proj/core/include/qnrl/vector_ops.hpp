#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace qnrl {

/// Flat float64 vector of every trainable weight.
using ParamVector = std::vector<double>;

// Reductions below sum strictly left to right so that results are
// bitwise reproducible across runs and thread counts.

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);

ParamVector add_scaled(std::span<const double> x, double a, std::span<const double> d);
ParamVector subtract(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> a);

/// Throws InvalidInput naming `what` when the sizes differ.
void require_same_size(std::size_t a, std::size_t b, std::string_view what);

}  // namespace qnrl
