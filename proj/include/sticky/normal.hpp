#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace sticky::normal {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;
inline constexpr double inv_sqrt2pi = 0.39894228040143267794;

inline double pdf(double z) { return inv_sqrt2pi * std::exp(-0.5 * z * z); }

/// Evaluated through erfc so that both tails keep full relative precision.
inline double cdf(double z) { return 0.5 * std::erfc(-z * inv_sqrt2); }

/// Upper tail 1 - cdf(z), without cancellation.
inline double sf(double z) { return 0.5 * std::erfc(z * inv_sqrt2); }

inline double quantile(double q) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

/// Quantile for q near 1, given its complement 1 - q.
inline double quantile_upper(double one_minus_q) {
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * one_minus_q);
}

} // namespace sticky::normal
