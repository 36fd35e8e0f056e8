#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <random>

namespace qnrl {

/// Engine used everywhere. Draws go through the helpers below rather than the
/// std distributions, whose output is implementation defined.
using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform in {0, ..., n-1}; n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t reject_from = Rng::max() - Rng::max() % bound;  // unbiased modulo
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= reject_from);
    return static_cast<std::size_t>(v % bound);
}

/// Standard normal via Box-Muller.
inline double standard_normal(Rng& rng) {
    constexpr double two_pi = 6.283185307179586;
    double u1 = 1.0 - uniform01(rng);  // (0, 1]
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace qnrl
