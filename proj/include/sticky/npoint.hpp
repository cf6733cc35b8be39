#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sticky/covariance.hpp"
#include "sticky/error.hpp"
#include "sticky/path.hpp"
#include "sticky/rng.hpp"
#include "sticky/timechange.hpp"

namespace sticky {

enum class Driver { dense, fourier };

inline std::string to_string(Driver d) { return d == Driver::dense ? "dense" : "fourier"; }

inline Driver parse_driver(const std::string& s) {
    if (s == "dense") return Driver::dense;
    if (s == "fourier") return Driver::fourier;
    throw Error("unknown driver '" + s + "' (expected dense or fourier)");
}

/// Parameters of one prelimit N-point simulation.
struct SimConfig {
    int N = 2;
    ScaledModel scaled;
    std::vector<double> x0;
    double dt = 1e-4;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    Driver driver = Driver::dense;
    std::size_t fourier_features = 1024;
    std::size_t record_every = 1;
    /// Label of the noise stream owned by each coordinate; defaults to 0..N-1.
    std::vector<std::uint64_t> stream_labels;

    explicit SimConfig(ScaledModel s) : scaled(std::move(s)) {}

    /// Throws on invalid settings and returns advisory warnings.
    std::vector<std::string> validate() const {
        if (N < 1) throw Error("simulate: N must be >= 1");
        if (static_cast<int>(x0.size()) != N) throw Error("simulate: x0 must have N coordinates");
        if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon) throw Error("simulate: need 0 < dt <= horizon");
        if (record_every < 1) throw Error("simulate: record_every must be >= 1");
        if (!stream_labels.empty() && static_cast<int>(stream_labels.size()) != N)
            throw Error("simulate: stream_labels must have N entries");
        if (driver == Driver::fourier && fourier_features < 1) throw Error("simulate: fourier_features must be >= 1");
        std::vector<std::string> warnings;
        double n = scaled.n;
        if (dt * n * n > 0.1)
            warnings.push_back("dt * n^2 = " + std::to_string(dt * n * n) + " exceeds 0.1; the sticky region is under-resolved");
        return warnings;
    }
};

/// Small dense row-major matrix.
struct Matrix {
    int n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(int n_) : n(n_), a(static_cast<std::size_t>(n_ * n_), 0.0) {}
    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i * n + j)]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i * n + j)]; }
};

/// Sigma_ij = psi(n (x_i - x_j)) + (b^2 / n^2) 1(i = j).
inline Matrix step_covariance(const ScaledModel& s, std::span<const double> x) {
    int N = static_cast<int>(x.size());
    Matrix m(N);
    double beta = s.beta();
    for (int i = 0; i < N; ++i) {
        m(i, i) = 1.0 + beta;
        for (int j = 0; j < i; ++j) m(i, j) = m(j, i) = 1.0 - s.one_minus_psi(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
    }
    return m;
}

struct CholeskyFactor {
    Matrix L;
    double jitter = 0.0;
};

namespace detail {
/// In-place lower Cholesky of `m` (lower triangle read); false if not positive definite.
inline bool cholesky_in_place(Matrix& m) {
    int n = m.n;
    for (int j = 0; j < n; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        m(j, j) = d;
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
            m(i, j) = s / d;
        }
        for (int i = 0; i < j; ++i) m(i, j) = 0.0;
    }
    return true;
}
} // namespace detail

/// L with L L^T = Sigma + jitter I; jitter escalates by decades from 0 up to
/// 1e-8 trace(Sigma) / N.
inline CholeskyFactor factor_covariance(const Matrix& sigma) {
    int n = sigma.n;
    double trace = 0.0;
    for (int i = 0; i < n; ++i) trace += sigma(i, i);
    double cap = 1e-8 * trace / n;
    for (double jitter = 0.0;;) {
        Matrix m = sigma;
        for (int i = 0; i < n; ++i) m(i, i) += jitter;
        if (detail::cholesky_in_place(m)) return {std::move(m), jitter};
        if (jitter >= cap) break;
        jitter = jitter == 0.0 ? cap * 1e-8 : std::min(jitter * 10.0, cap);
    }
    throw Error("factor_covariance: matrix is not positive definite even with jitter " + std::to_string(cap));
}

/// Euler-Maruyama stepper for the prelimit N-point motion in coordinates
/// relative to an anchor, which keeps the scheme exactly shift-equivariant.
class NPointStepper {
public:
    explicit NPointStepper(const SimConfig& cfg) : cfg_(cfg), N_(cfg.N), sigma_(cfg.N) {
        cfg.validate();
        for (int i = 0; i < N_; ++i) {
            std::uint64_t label = cfg.stream_labels.empty() ? static_cast<std::uint64_t>(i) : cfg.stream_labels[static_cast<std::size_t>(i)];
            streams_.emplace_back(cfg.seed, "coordinate", label);
        }
        if (cfg.driver == Driver::fourier) field_rng_.emplace(cfg.seed, "field", 0);
        xi_.resize(static_cast<std::size_t>(N_));
        order_.resize(static_cast<std::size_t>(N_));
        ordered_.resize(static_cast<std::size_t>(N_));
    }

    /// Advances y (relative coordinates) by one step of length dt.
    void step(std::span<double> y, double dt) {
        double sd = std::sqrt(dt);
        for (int i = 0; i < N_; ++i) xi_[static_cast<std::size_t>(i)] = streams_[static_cast<std::size_t>(i)].normal();
        if (cfg_.driver == Driver::dense)
            dense_step(y, sd);
        else
            fourier_step(y, sd);
    }

private:
    void dense_step(std::span<double> y, double sd) {
        if (N_ <= small_n) {
            dense_step_small(y, sd);
            return;
        }
        // The factor is taken in the order of (position, own noise), a labelling-free order.
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(), [&](int p, int q) {
            auto up = static_cast<std::size_t>(p), uq = static_cast<std::size_t>(q);
            return y[up] != y[uq] ? y[up] < y[uq] : xi_[up] < xi_[uq];
        });
        double beta = cfg_.scaled.beta();
        for (int p = 0; p < N_; ++p) {
            auto ip = static_cast<std::size_t>(order_[static_cast<std::size_t>(p)]);
            sigma_(p, p) = 1.0 + beta;
            for (int q = 0; q < p; ++q) {
                auto iq = static_cast<std::size_t>(order_[static_cast<std::size_t>(q)]);
                sigma_(p, q) = 1.0 - cfg_.scaled.one_minus_psi(y[ip] - y[iq]);
            }
        }
        if (!detail::cholesky_in_place(sigma_)) {
            Matrix full(N_);
            for (int p = 0; p < N_; ++p)
                for (int q = 0; q <= p; ++q) full(p, q) = full(q, p) = sigma_(p, q);
            sigma_ = factor_covariance(full).L;
        }
        for (int p = 0; p < N_; ++p) ordered_[static_cast<std::size_t>(p)] = xi_[static_cast<std::size_t>(order_[static_cast<std::size_t>(p)])];
        for (int p = 0; p < N_; ++p) {
            double inc = 0.0;
            for (int q = 0; q <= p; ++q) inc += sigma_(p, q) * ordered_[static_cast<std::size_t>(q)];
            y[static_cast<std::size_t>(order_[static_cast<std::size_t>(p)])] += sd * inc;
        }
    }

    // Same arithmetic as the general path on fixed-size storage; exit-time runs
    // spend nearly all of their time here.
    static constexpr int small_n = 4;

    void dense_step_small(std::span<double> y, double sd) {
        std::array<int, small_n> ord{};
        for (int i = 0; i < N_; ++i) {
            int j = i;
            auto ui = static_cast<std::size_t>(i);
            while (j > 0) {
                auto uj = static_cast<std::size_t>(ord[static_cast<std::size_t>(j - 1)]);
                bool after = y[uj] != y[ui] ? y[uj] > y[ui] : xi_[uj] > xi_[ui];
                if (!after) break;
                ord[static_cast<std::size_t>(j)] = ord[static_cast<std::size_t>(j - 1)];
                --j;
            }
            ord[static_cast<std::size_t>(j)] = i;
        }
        std::array<double, small_n * small_n> L{};
        std::array<double, small_n> pos{}, z{};
        for (int p = 0; p < N_; ++p) {
            pos[static_cast<std::size_t>(p)] = y[static_cast<std::size_t>(ord[static_cast<std::size_t>(p)])];
            z[static_cast<std::size_t>(p)] = xi_[static_cast<std::size_t>(ord[static_cast<std::size_t>(p)])];
        }
        double diag = 1.0 + cfg_.scaled.beta();
        bool ok = true;
        for (int j = 0; j < N_ && ok; ++j) {
            double d = diag;
            for (int k = 0; k < j; ++k) d -= L[static_cast<std::size_t>(j * small_n + k)] * L[static_cast<std::size_t>(j * small_n + k)];
            if (!(d > 0.0)) {
                ok = false;
                break;
            }
            d = std::sqrt(d);
            L[static_cast<std::size_t>(j * small_n + j)] = d;
            for (int i = j + 1; i < N_; ++i) {
                double s = 1.0 - cfg_.scaled.one_minus_psi(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]);
                for (int k = 0; k < j; ++k) s -= L[static_cast<std::size_t>(i * small_n + k)] * L[static_cast<std::size_t>(j * small_n + k)];
                L[static_cast<std::size_t>(i * small_n + j)] = s / d;
            }
        }
        if (!ok) {
            Matrix full(N_);
            for (int p = 0; p < N_; ++p) {
                full(p, p) = diag;
                for (int q = 0; q < p; ++q)
                    full(p, q) = full(q, p) = 1.0 - cfg_.scaled.one_minus_psi(pos[static_cast<std::size_t>(p)] - pos[static_cast<std::size_t>(q)]);
            }
            Matrix f = factor_covariance(full).L;
            for (int p = 0; p < N_; ++p)
                for (int q = 0; q <= p; ++q) L[static_cast<std::size_t>(p * small_n + q)] = f(p, q);
        }
        for (int p = 0; p < N_; ++p) {
            double inc = 0.0;
            for (int q = 0; q <= p; ++q) inc += L[static_cast<std::size_t>(p * small_n + q)] * z[static_cast<std::size_t>(q)];
            y[static_cast<std::size_t>(ord[static_cast<std::size_t>(p)])] += sd * inc;
        }
    }

    void fourier_step(std::span<double> y, double sd) {
        FourierField field = sample_field(cfg_.scaled, cfg_.fourier_features, *field_rng_);
        double noise = cfg_.scaled.b / cfg_.scaled.n;
        for (int i = 0; i < N_; ++i) {
            auto u = static_cast<std::size_t>(i);
            y[u] += sd * (field(y[u]) + noise * xi_[u]);
        }
    }

    const SimConfig& cfg_;
    int N_;
    Matrix sigma_;
    std::vector<Stream> streams_;
    std::optional<Stream> field_rng_;
    std::vector<double> xi_;
    std::vector<int> order_;
    std::vector<double> ordered_;
};

/// Euler-Maruyama path of the prelimit N-point motion. Rows are kept every
/// record_every steps, and the final step is always kept.
inline Path simulate(const SimConfig& cfg) {
    auto warnings = cfg.validate();
    std::size_t steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
    NPointStepper stepper(cfg);
    double anchor = cfg.x0[0];
    std::vector<double> y(cfg.x0.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = cfg.x0[i] - anchor;
    Path path;
    path.N = cfg.N;
    path.dt = cfg.dt * static_cast<double>(cfg.record_every);
    path.seed = cfg.seed;
    auto record = [&](std::size_t k) {
        path.times.push_back(static_cast<double>(k) * cfg.dt);
        for (double v : y) path.states.push_back(anchor + v);
    };
    record(0);
    for (std::size_t k = 1; k <= steps; ++k) {
        stepper.step(y, cfg.dt);
        for (double v : y)
            if (!std::isfinite(v)) throw Error("simulate: non-finite state at step " + std::to_string(k));
        if (k % cfg.record_every == 0 || k == steps) record(k);
    }
    path.meta["driver"] = to_string(cfg.driver);
    path.meta["psi"] = cfg.scaled.base.describe();
    path.meta["n"] = std::to_string(cfg.scaled.n);
    path.meta["b"] = std::to_string(cfg.scaled.b);
    for (std::size_t w = 0; w < warnings.size(); ++w) path.meta["warning" + std::to_string(w)] = warnings[w];
    return path;
}

inline Path simulate(SimConfig cfg, const Stream& rng) {
    cfg.seed = rng.seed();
    return simulate(cfg);
}

struct TimeChangeOptions {
    double bm_step = 0.0;          // step of the driving Brownian motion; 0 means min(dt, 1e-4)
    bool psi_off = false;          // decoupled control: unit speed, no covariance spike
    std::size_t max_steps = 100'000'000;
};

/// The two-point difference Z = X1 - X2 as B(tau_t), with tau the inverse of
/// A(u) = (1/2) int_0^u ds / (1 + b^2/n^2 - psi(n B_s)). The additive
/// functional is accumulated exactly in conditional expectation over each
/// Brownian bridge step and inverted by linear interpolation.
inline Path two_point_difference_timechange(const PrelimitClock& clock, double z0, double horizon, double dt, double h,
                                            Stream& rng, std::size_t max_steps = 100'000'000) {
    auto tc = time_changed_path(clock, z0, horizon, dt, h, rng, max_steps);
    Path p;
    p.N = 1;
    p.dt = dt;
    p.seed = rng.seed();
    p.states = std::move(tc.values);
    for (std::size_t k = 0; k < p.states.size(); ++k) p.times.push_back(static_cast<double>(k) * dt);
    p.meta["bm_steps"] = std::to_string(tc.bm_steps);
    p.meta["bm_step"] = std::to_string(h);
    return p;
}

inline Path two_point_difference_timechange(const ScaledModel& s, double z0, double horizon, double dt, Stream& rng,
                                            const TimeChangeOptions& opt = {}) {
    double h = opt.bm_step > 0.0 ? opt.bm_step : std::min(dt, 1e-4);
    PrelimitClock clock(s, h, 0.0, opt.psi_off);
    return two_point_difference_timechange(clock, z0, horizon, dt, h, rng, opt.max_steps);
}

} // namespace sticky
