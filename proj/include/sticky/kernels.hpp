#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "sticky/covariance.hpp"
#include "sticky/error.hpp"
#include "sticky/rng.hpp"
#include "sticky/stats.hpp"

namespace sticky {

/// A density on the periodic grid of `cells` cells covering [0, length).
struct KernelField {
    double length = 1.0;
    std::vector<double> v;
    double t = 0.0;
    std::map<std::string, std::string> meta;

    std::size_t cells() const noexcept { return v.size(); }
    double dx() const { return length / static_cast<double>(v.size()); }
    double center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * dx(); }
    double mass() const {
        // Pairwise summation keeps the round-off of long runs at the 1e-16 level.
        std::vector<double> m(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] * dx();
        return pairwise_sum(m);
    }
    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += center(i) * v[i] * dx();
        return s / mass();
    }
    double variance() const {
        double mu = mean(), s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += (center(i) - mu) * (center(i) - mu) * v[i] * dx();
        return s / mass();
    }

    static KernelField point_mass(double length, std::size_t cells, double x0) {
        if (cells < 4 || !(length > 0.0)) throw Error("kernel field: need length > 0 and >= 4 cells");
        KernelField f;
        f.length = length;
        f.v.assign(cells, 0.0);
        double w = std::fmod(std::fmod(x0, length) + length, length);
        std::size_t i = std::min(cells - 1, static_cast<std::size_t>(w / f.dx()));
        f.v[i] = 1.0 / f.dx();
        return f;
    }

    static KernelField gaussian(double length, std::size_t cells, double x0, double sd) {
        KernelField f;
        f.length = length;
        f.v.assign(cells, 0.0);
        for (std::size_t i = 0; i < cells; ++i) {
            double d = f.center(i) - x0;
            d -= length * std::round(d / length);
            f.v[i] = std::exp(-0.5 * d * d / (sd * sd));
        }
        double m = f.mass();
        for (auto& x : f.v) x /= m;
        return f;
    }

    /// Sums groups of adjacent cells; `cells` must divide the current count.
    KernelField rebin(std::size_t cells_out) const {
        if (cells_out == 0 || cells() % cells_out != 0) throw Error("kernel field: rebin factor must divide the cell count");
        std::size_t k = cells() / cells_out;
        KernelField out;
        out.length = length;
        out.t = t;
        out.v.assign(cells_out, 0.0);
        for (std::size_t i = 0; i < cells(); ++i) out.v[i / k] += v[i] / static_cast<double>(k);
        return out;
    }
};

/// Default periodic domain: ten field correlation lengths 1/(na). The kernel
/// lives on the circle of this length, so its mass wraps around for large t.
inline double default_kernel_length(const ScaledModel& s) { return 10.0 / (s.n * s.base.a()); }

/// Explicit time step at the diffusion limit D dt / dx^2 = cfl.
inline double spde_stable_dt(const ScaledModel& s, double dx, double cfl = 0.25) {
    return cfl * dx * dx / (0.5 * (1.0 + s.beta()));
}

struct SpdeOptions {
    bool field_enabled = true;
    double cfl_limit = 0.25;
};

struct SpdeDiagnostics {
    std::size_t steps = 0;
    std::size_t negative_cell_steps = 0;
    double negative_fraction = 0.0;
    double flux_mass_drift = 0.0;  // relative mass change from the flux and diffusion updates alone
    bool flagged = false;
};

/// dv = -d/dy (v dW) + (1/2)(1 + b^2/n^2) d^2v/dy^2 dt on the periodic grid,
/// forward Euler in time. The stochastic term uses face fluxes
/// (v_{i-1} + v_i)/2 * dW(y_{i-1/2}), so total mass is unchanged by
/// construction. Field increments on the faces come from the periodic
/// spectral sampler driven by `field_rng`.
inline KernelField spde_evolve(KernelField field, const ScaledModel& s, double horizon, double dt, Stream& field_rng,
                               const SpdeOptions& opt = {}, SpdeDiagnostics* diag = nullptr) {
    std::size_t M = field.cells();
    double dx = field.dx();
    double D = 0.5 * (1.0 + s.beta());
    double cfl = D * dt / (dx * dx);
    if (!(dt > 0.0) || cfl > opt.cfl_limit)
        throw Error("spde: CFL violation, D dt / dx^2 = " + std::to_string(cfl) + " exceeds " + std::to_string(opt.cfl_limit));
    std::size_t steps = static_cast<std::size_t>(std::llround(horizon / dt));
    std::unique_ptr<PeriodicFieldSampler> sampler;
    if (opt.field_enabled) sampler = std::make_unique<PeriodicFieldSampler>(s, field.length, M);
    std::vector<double> dw(M, 0.0), flux(M), next(M);
    double sd = std::sqrt(dt);
    SpdeDiagnostics d;
    double m0 = field.mass();
    double drift = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        if (sampler) {
            sampler->next(field_rng, dw);
            for (auto& w : dw) w *= sd;
        }
        auto& v = field.v;
        // Face i sits at y = i dx, between cells i-1 and i.
        for (std::size_t i = 0; i < M; ++i) {
            std::size_t im = i == 0 ? M - 1 : i - 1;
            flux[i] = 0.5 * (v[im] + v[i]) * dw[i];
        }
        for (std::size_t i = 0; i < M; ++i) {
            std::size_t im = i == 0 ? M - 1 : i - 1, ip = i + 1 == M ? 0 : i + 1;
            next[i] = v[i] - (flux[ip] - flux[i]) / dx + cfl * (v[ip] - 2.0 * v[i] + v[im]);
        }
        v.swap(next);
        double before = field.mass();
        drift = std::max(drift, std::abs(before - m0) / m0);
        std::size_t negative = 0;
        for (auto& x : v)
            if (x < 0.0) {
                x = 0.0;
                ++negative;
            }
        if (negative > 0) {
            d.negative_cell_steps += negative;
            double after = field.mass();
            for (auto& x : v) x *= before / after;
        }
        m0 = before;
        field.t += dt;
    }
    d.steps = steps;
    d.flux_mass_drift = drift;
    d.negative_fraction = steps > 0 ? static_cast<double>(d.negative_cell_steps) / static_cast<double>(steps * M) : 0.0;
    d.flagged = d.negative_fraction >= 1e-3;
    field.meta["field_seed"] = std::to_string(field_rng.seed());
    field.meta["negative_fraction"] = std::to_string(d.negative_fraction);
    if (d.flagged) field.meta["warning"] = "negative cells above 0.1% of cell-steps";
    if (diag) *diag = d;
    return field;
}

struct FilterOptions {
    std::size_t particles = 4000;
    std::size_t cells = 512;
    double length = 0.0;       // 0 means default_kernel_length
    double dt = 0.0;           // field step; 0 means the SPDE-stable step of the grid
    std::size_t substeps = 1;  // field steps summed into one particle step
    bool field_enabled = true;
};

/// Empirical kernel K_{0,t}(x0, .): particles dX = dW(t, X) + (b/n) dB_i share
/// one realization of the field, evaluated by linear interpolation on the
/// periodic grid. Consuming `field_rng` exactly as spde_evolve does (one draw
/// per field step) makes the two comparable realization by realization.
/// Returns `snapshots` histograms at equally spaced times up to t.
inline std::vector<KernelField> filter_kernel_snapshots(const ScaledModel& s, double x0, double t, Stream& field_rng,
                                                        Stream& particle_rng, const FilterOptions& opt,
                                                        std::size_t snapshots) {
    if (opt.particles < 1) throw Error("filter_kernel: need at least one particle");
    if (opt.substeps < 1) throw Error("filter_kernel: substeps must be >= 1");
    if (snapshots < 1) throw Error("filter_kernel: need at least one snapshot");
    double L = opt.length > 0.0 ? opt.length : default_kernel_length(s);
    std::size_t M = opt.cells;
    if (M < 4) throw Error("filter_kernel: need at least 4 cells");
    double dx = L / static_cast<double>(M);
    double dt = opt.dt > 0.0 ? opt.dt : spde_stable_dt(s, dx);
    std::size_t field_steps = static_cast<std::size_t>(std::llround(t / dt));
    std::unique_ptr<PeriodicFieldSampler> sampler;
    if (opt.field_enabled) sampler = std::make_unique<PeriodicFieldSampler>(s, L, M);
    std::vector<double> x(opt.particles, x0), draw(M), dw(M);
    double sd = std::sqrt(dt), noise = s.b / s.n;
    auto wrap = [L](double y) { return y - L * std::floor(y / L); };
    auto histogram = [&](std::size_t steps_done) {
        KernelField out;
        out.length = L;
        out.t = static_cast<double>(steps_done) * dt;
        out.meta["field_seed"] = std::to_string(field_rng.seed());
        out.meta["particle_seed"] = std::to_string(particle_rng.seed());
        out.meta["length"] = std::to_string(L);
        out.meta["boundary"] = "periodic";
        out.v.assign(M, 0.0);
        double weight = 1.0 / (static_cast<double>(opt.particles) * dx);
        for (double p : x) {
            auto i = static_cast<std::size_t>(wrap(p) / dx);
            out.v[std::min(i, M - 1)] += weight;
        }
        return out;
    };
    std::vector<KernelField> out;
    std::size_t done = 0;
    for (std::size_t snap = 1; snap <= snapshots; ++snap) {
        std::size_t target = field_steps * snap / snapshots;
        while (done < target) {
            std::size_t k = std::min(opt.substeps, target - done);
            std::fill(dw.begin(), dw.end(), 0.0);
            if (sampler)
                for (std::size_t j = 0; j < k; ++j) {
                    sampler->next(field_rng, draw);
                    for (std::size_t i = 0; i < M; ++i) dw[i] += sd * draw[i];
                }
            double noise_sd = noise * std::sqrt(static_cast<double>(k) * dt);
            for (auto& p : x) {
                double u = wrap(p) / dx;
                auto i = static_cast<std::size_t>(u);
                if (i >= M) i = M - 1;
                double f = u - static_cast<double>(i);
                double w = (1.0 - f) * dw[i] + f * dw[i + 1 == M ? 0 : i + 1];
                p += w + noise_sd * particle_rng.normal();
            }
            done += k;
        }
        out.push_back(histogram(done));
    }
    return out;
}

inline KernelField filter_kernel(const ScaledModel& s, double x0, double t, Stream& field_rng, Stream& particle_rng,
                                 const FilterOptions& opt = {}) {
    return filter_kernel_snapshots(s, x0, t, field_rng, particle_rng, opt, 1).front();
}

struct DensityStats {
    double max_mass = 0.0;
    double entropy = 0.0;
    double support_fraction = 0.0;
};

/// Cell masses p_i = v_i dx: the largest one, the Shannon entropy, and the
/// fraction of cells whose mass exceeds `threshold` (default 0.1 / cells).
inline DensityStats density_stats(const KernelField& f, double threshold = -1.0) {
    if (f.cells() == 0) throw Error("density_stats: empty field");
    double dx = f.dx(), total = f.mass();
    if (threshold < 0.0) threshold = 0.1 / static_cast<double>(f.cells());
    DensityStats d;
    std::size_t above = 0;
    for (double v : f.v) {
        double p = v * dx / total;
        d.max_mass = std::max(d.max_mass, p);
        if (p > 0.0) d.entropy -= p * std::log(p);
        if (p > threshold) ++above;
    }
    d.support_fraction = static_cast<double>(above) / static_cast<double>(f.cells());
    return d;
}

} // namespace sticky
