#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "sticky/error.hpp"
#include "sticky/path.hpp"
#include "sticky/rng.hpp"
#include "sticky/timechange.hpp"

namespace sticky {

/// One-dimensional sticky Brownian motion with speed measure (dz + delta_0 / theta) / r,
/// that is Brownian motion of variance rate r away from 0.
struct StickyParams {
    double theta = 1.0;
    double z0 = 0.0;
    double horizon = 1.0;
    double dt = 1e-3;
    std::uint64_t seed = 1;
    double variance_rate = 1.0;
    double bm_step = 0.0;  // step of the driving Brownian motion; 0 means dt / 4
    LocalTimeEstimator estimator = LocalTimeEstimator::tanaka;
    std::size_t max_steps = 200'000'000;

    double driving_step() const { return bm_step > 0.0 ? bm_step : dt / 4.0; }

    void validate() const {
        if (!(theta > 0.0)) throw Error("sticky: theta must be positive");
        if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon) throw Error("sticky: need 0 < dt <= horizon");
        if (!(variance_rate > 0.0)) throw Error("sticky: variance_rate must be positive");
    }
};

/// Z(t) = B(A^{-1}(t)) with A(u) = (u + L_u / theta) / r. Grid times falling
/// inside a flat stretch of A^{-1} are flagged as exactly at 0.
inline Path simulate_sticky(const StickyParams& p, Stream& rng) {
    p.validate();
    double h = p.driving_step();
    StickyClock clock(p.theta, p.variance_rate, 0.0, p.estimator);
    auto tc = time_changed_path(clock, p.z0, p.horizon, p.dt, h, rng, p.max_steps);
    Path path;
    path.N = 1;
    path.dt = p.dt;
    path.seed = rng.seed();
    path.states = std::move(tc.values);
    path.at_zero = std::move(tc.at_zero);
    for (std::size_t k = 0; k < path.states.size(); ++k) path.times.push_back(static_cast<double>(k) * p.dt);
    path.meta["theta"] = std::to_string(p.theta);
    path.meta["variance_rate"] = std::to_string(p.variance_rate);
    path.meta["bm_step"] = std::to_string(h);
    path.meta["zero_time"] = std::to_string(tc.zero_time);
    if (std::sqrt(p.dt) * p.theta > 0.1) path.meta["warning"] = "sqrt(dt) is not small against 1/theta";
    return path;
}

inline Path simulate_sticky(StickyParams p) {
    Stream rng(p.seed);
    return simulate_sticky(p, rng);
}

struct Occupation {
    double time_in_band = 0.0;
    double zero_set_fraction = 0.0;
};

/// Lebesgue time spent in [-delta, delta], from the path interpolated
/// linearly between grid times. For delta = 0 the exact-zero flags are used.
inline Occupation occupation_statistics(const Path& path, double delta) {
    if (path.N != 1) throw Error("occupation_statistics: path must be one-dimensional");
    if (!(delta >= 0.0)) throw Error("occupation_statistics: delta must be >= 0");
    Occupation occ;
    std::size_t rows = path.rows();
    if (rows < 2) return occ;
    double horizon = path.times.back() - path.times.front();
    double zero = 0.0;
    if (!path.at_zero.empty()) {
        for (std::size_t k = 0; k + 1 < rows; ++k)
            if (path.at_zero[k] && path.at_zero[k + 1]) zero += path.times[k + 1] - path.times[k];
    }
    occ.zero_set_fraction = zero / horizon;
    if (delta == 0.0) {
        occ.time_in_band = zero;
        return occ;
    }
    if (std::isinf(delta)) {
        occ.time_in_band = horizon;
        return occ;
    }
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < rows; ++k) {
        double x = path.states[k], y = path.states[k + 1], w = path.times[k + 1] - path.times[k];
        if (x == y) {
            total += std::abs(x) <= delta ? w : 0.0;
            continue;
        }
        // Fraction of the linear segment from x to y inside [-delta, delta].
        double lo = std::min(x, y), hi = std::max(x, y);
        double inside = std::max(0.0, std::min(hi, delta) - std::max(lo, -delta));
        total += w * inside / (hi - lo);
    }
    occ.time_in_band = total;
    return occ;
}

} // namespace sticky
