#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "sticky/covariance.hpp"
#include "sticky/error.hpp"
#include "sticky/quadrature.hpp"

namespace sticky {

/// Scaled complementary error function exp(w^2) erfc(w) for w >= 0.
inline double erfcx(double w) {
    if (w < 25.0) return std::exp(w * w) * std::erfc(w);
    double r = 1.0 / (w * w);
    return (1.0 - r * (0.5 - r * (0.75 - r * (1.875 - r * 6.5625)))) / (w * std::sqrt(std::numbers::pi));
}

/// exp(w^2) times the integrated complementary error function
/// ierfc(w) = int_w^inf erfc(s) ds = exp(-w^2)/sqrt(pi) - w erfc(w), for w >= 0.
inline double ierfcx(double w) {
    if (w < 50.0) return 1.0 / std::sqrt(std::numbers::pi) - w * erfcx(w);
    double r = 1.0 / (w * w);
    return r * (1.0 - r * (1.5 - r * (3.75 - r * 13.125))) / (2.0 * std::sqrt(std::numbers::pi));
}

/// A Brownian bridge from x to y over time h (unit diffusion). Its expected
/// occupation density is
///   g(z) = sqrt(pi h / 2) exp(u^2) erfc(u + kappa d(z))
/// with u = |y - x| / sqrt(2h), kappa = sqrt(2/h) and d(z) the distance from z to
/// the segment between x and y.
struct Bridge {
    double x, y, h;
    double lo, hi, u, kappa, scale;

    Bridge(double x_, double y_, double h_)
        : x(x_), y(y_), h(h_), lo(std::min(x_, y_)), hi(std::max(x_, y_)), u(std::abs(y_ - x_) / std::sqrt(2.0 * h_)),
          kappa(std::sqrt(2.0 / h_)), scale(std::sqrt(0.5 * std::numbers::pi * h_)) {}

    double distance(double z) const { return z > hi ? z - hi : (z < lo ? lo - z : 0.0); }

    double density(double z) const {
        double s = kappa * distance(z);
        return scale * erfcx(u + s) * std::exp(-s * (2.0 * u + s));
    }

    /// Expected time spent in [alpha, beta].
    double time_in(double alpha, double beta) const {
        if (!(beta > alpha)) return 0.0;
        double total = 0.0;
        // Inside the segment the density is flat.
        double a = std::max(alpha, lo), b = std::min(beta, hi);
        if (b > a) total += scale * erfcx(u) * (b - a);
        // exp(u^2) ierfc(u + kappa d), written to stay bounded.
        auto tail = [&](double d) {
            if (!std::isfinite(d)) return 0.0;
            double s = kappa * d;
            return scale / kappa * ierfcx(u + s) * std::exp(-s * (2.0 * u + s));
        };
        if (beta > hi) total += tail(std::max(alpha, hi) - hi) - tail(beta - hi);
        if (alpha < lo) total += tail(lo - std::min(beta, lo)) - tail(lo - alpha);
        return total;
    }
};

/// Precomputed integrals of the bridge occupation density against an even,
/// sharply peaked, nonnegative function p:
///   I(x, y) = int g_{x,y,h}(z) p(z) dz.
/// Splitting z at the bridge segment [lo, hi],
///   I = scale (erfcx(u) (P(hi) - P(lo)) + R(hi, u) + R(-lo, u)),
///   R(c, u) = int_c^inf erfcx(u + kappa (z - c)) exp(-kappa (z - c)(2u + kappa (z - c))) p(z) dz,
/// with P the cumulative of p. Both are tabulated on the grid z = w sinh(t),
/// which resolves the peak width w and the far tails alike.
class BridgeSpikeTable {
public:
    BridgeSpikeTable(std::function<double(double)> p, double peak_width, double support, double h,
                     int t_nodes = 480, double u_step = 0.05, double u_max = 6.0)
        : p_(std::move(p)), w_(peak_width), h_(h), kappa_(std::sqrt(2.0 / h)), scale_(std::sqrt(0.5 * std::numbers::pi * h)),
          u_step_(u_step) {
        if (!(peak_width > 0.0) || !(support > 0.0) || !(h > 0.0)) throw Error("bridge table: bad parameters");
        reach_ = support + cutoff / kappa_;
        t_max_ = std::asinh(reach_ / w_);
        nt_ = t_nodes;
        dt_ = 2.0 * t_max_ / nt_;
        // One ghost column at u = -u_step keeps the cubic stencil valid at u = 0.
        nu_ = static_cast<int>(std::lround(u_max / u_step)) + 2;
        build();
    }

    double reach() const noexcept { return reach_; }
    double step() const noexcept { return h_; }
    /// Total mass of p (on the tabulated range).
    double mass() const noexcept { return cumulative_.back(); }

    double integral(double x, double y) const {
        Bridge br(x, y, h_);
        if (br.lo > reach_ || br.hi < -reach_) return 0.0;
        if (br.u > u_step_ * (nu_ - 4)) return direct(br);
        double inside = erfcx(br.u) * (cumulative_at(br.hi) - cumulative_at(br.lo));
        return scale_ * (inside + tail(br.hi, br.u) + tail(-br.lo, br.u));
    }

    /// Reference value by adaptive quadrature, for steps outside the table and for tests.
    double direct(const Bridge& br) const {
        std::vector<double> cuts{-reach_, br.lo, br.hi, reach_, 0.0};
        for (double c = w_; c < reach_; c *= 4.0) {
            cuts.push_back(c);
            cuts.push_back(-c);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        std::vector<double> kept;
        for (double c : cuts)
            if (c >= -reach_ && c <= reach_) kept.push_back(c);
        return quad::adaptive([&](double z) { return br.density(z) * p_(z); }, kept, 1e-10 * scale_ * (mass() + 1e-300), 20000)
            .value;
    }

private:
    static constexpr double cutoff = 8.5;  // exp(-cutoff^2) is below double precision
    static constexpr int gauss_order = 6;

    double t_of(double z) const { return std::asinh(z / w_); }
    double z_of(double t) const { return w_ * std::sinh(t); }

    void build() {
        using GL = boost::math::quadrature::gauss<double, gauss_order>;
        const auto& ax = GL::abscissa();
        const auto& aw = GL::weights();
        // Quadrature nodes (z, p(z) dz) panel by panel in t.
        std::vector<std::vector<std::pair<double, double>>> panels(static_cast<std::size_t>(nt_));
        for (int k = 0; k < nt_; ++k) {
            double t0 = -t_max_ + k * dt_, mid = t0 + 0.5 * dt_;
            auto add = [&](double xi, double wi) {
                double t = mid + 0.5 * dt_ * xi;
                double z = z_of(t);
                panels[static_cast<std::size_t>(k)].push_back({z, 0.5 * dt_ * wi * p_(z) * w_ * std::cosh(t)});
            };
            for (std::size_t i = 0; i < ax.size(); ++i) {
                add(ax[i], aw[i]);
                if (ax[i] != 0.0) add(-ax[i], aw[i]);
            }
        }
        cumulative_.assign(static_cast<std::size_t>(nt_) + 1, 0.0);
        density_t_.assign(static_cast<std::size_t>(nt_) + 1, 0.0);
        for (int k = 0; k <= nt_; ++k) {
            double t = -t_max_ + k * dt_;
            density_t_[static_cast<std::size_t>(k)] = p_(z_of(t)) * w_ * std::cosh(t);
            if (k > 0) {
                double s = 0.0;
                for (auto [z, wp] : panels[static_cast<std::size_t>(k - 1)]) s += wp;
                cumulative_[static_cast<std::size_t>(k)] = cumulative_[static_cast<std::size_t>(k - 1)] + s;
            }
        }
        tail_.assign(static_cast<std::size_t>((nt_ + 1) * nu_), 0.0);
        std::vector<double> acc(static_cast<std::size_t>(nu_));
        for (int i = 0; i <= nt_; ++i) {
            double c = z_of(-t_max_ + i * dt_);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int k = i; k < nt_; ++k) {
                const auto& nodes = panels[static_cast<std::size_t>(k)];
                if (kappa_ * (z_of(-t_max_ + k * dt_) - c) > cutoff) break;
                for (auto [z, wp] : nodes) {
                    double s = kappa_ * (z - c);
                    if (s > cutoff || wp == 0.0) continue;
                    for (int j = 0; j < nu_; ++j) {
                        double u = (j - 1) * u_step_;
                        double k_val = erfcx(u + s) * std::exp(-s * (2.0 * u + s));
                        acc[static_cast<std::size_t>(j)] += k_val * wp;
                        if (k_val < 1e-18) break;
                    }
                }
            }
            std::copy(acc.begin(), acc.end(), tail_.begin() + static_cast<std::ptrdiff_t>(i * nu_));
        }
    }

    /// Cubic Hermite interpolation of P in t, using dP/dt = p(z) dz/dt at the nodes.
    double cumulative_at(double z) const {
        double t = t_of(z);
        if (t <= -t_max_) return 0.0;
        if (t >= t_max_) return cumulative_.back();
        double pos = (t + t_max_) / dt_;
        int k = std::min(static_cast<int>(pos), nt_ - 1);
        double s = pos - k;
        double p0 = cumulative_[static_cast<std::size_t>(k)], p1 = cumulative_[static_cast<std::size_t>(k + 1)];
        double m0 = density_t_[static_cast<std::size_t>(k)] * dt_, m1 = density_t_[static_cast<std::size_t>(k + 1)] * dt_;
        double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
    }

    /// Bicubic (Catmull-Rom) interpolation of R(c, u).
    double tail(double c, double u) const {
        if (c >= reach_) return 0.0;
        double t = std::max(t_of(c), -t_max_);
        double pt = (t + t_max_) / dt_, pu = u / u_step_ + 1.0;
        int it = std::clamp(static_cast<int>(pt), 0, nt_ - 1), iu = std::clamp(static_cast<int>(pu), 0, nu_ - 2);
        double st = pt - it, su = pu - iu;
        auto at = [&](int i, int j) {
            i = std::clamp(i, 0, nt_);
            j = std::clamp(j, 0, nu_ - 1);
            return tail_[static_cast<std::size_t>(i * nu_ + j)];
        };
        auto weights = [](double s) {
            double s2 = s * s, s3 = s2 * s;
            return std::array<double, 4>{0.5 * (-s3 + 2 * s2 - s), 0.5 * (3 * s3 - 5 * s2 + 2), 0.5 * (-3 * s3 + 4 * s2 + s),
                                         0.5 * (s3 - s2)};
        };
        auto wt = weights(st), wu = weights(su);
        double v = 0.0;
        for (int a = 0; a < 4; ++a) {
            double row = 0.0;
            for (int b = 0; b < 4; ++b) row += wu[static_cast<std::size_t>(b)] * at(it - 1 + a, iu - 1 + b);
            v += wt[static_cast<std::size_t>(a)] * row;
        }
        return std::max(v, 0.0);
    }

    std::function<double(double)> p_;
    double w_, h_, kappa_, scale_, u_step_;
    double reach_ = 0.0, t_max_ = 0.0, dt_ = 0.0;
    int nt_ = 0, nu_ = 0;
    std::vector<double> cumulative_;
    std::vector<double> density_t_;
    std::vector<double> tail_;
};

/// Increment of a time-change clock A over one step of the driving Brownian
/// motion B: the total, the part spent in a band [-delta, delta], and the part
/// spent exactly at 0 (nonzero only for the sticky clock).
struct ClockIncrement {
    double total = 0.0;
    double band = 0.0;
    double zero = 0.0;
};

enum class LocalTimeEstimator { tanaka, bridge };

/// Clock of sticky Brownian motion run at `variance_rate` r:
/// A(u) = (u + L_u / theta) / r, with L the semimartingale local time of B at 0.
class StickyClock {
public:
    StickyClock(double theta, double variance_rate, double band, LocalTimeEstimator est)
        : inv_theta_(1.0 / theta), rate_(variance_rate), band_(band), est_(est) {
        if (!(theta > 0.0) || !(variance_rate > 0.0)) throw Error("sticky clock: theta and rate must be positive");
    }

    /// Local time of B at 0 accrued over the step.
    double local_time(double x, double y, double h) const {
        if (est_ == LocalTimeEstimator::tanaka) {
            double sgn = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
            return std::max(std::abs(y) - std::abs(x) - sgn * (y - x), 0.0);
        }
        return Bridge(x, y, h).density(0.0);
    }

    ClockIncrement step(double x, double y, double h) const {
        double lump = inv_theta_ * local_time(x, y, h) / rate_;
        ClockIncrement inc;
        inc.zero = lump;
        inc.total = h / rate_ + lump;
        inc.band = lump + band_time(x, y, h, band_) / rate_;
        return inc;
    }

    double inv_theta() const noexcept { return inv_theta_; }
    double rate() const noexcept { return rate_; }

    static double band_time(double x, double y, double h, double band) {
        if (!(band > 0.0)) return 0.0;
        if (!std::isfinite(band)) return h;
        double margin = 9.0 * std::sqrt(h / 2.0);
        double lo = std::min(x, y), hi = std::max(x, y);
        if (hi < -band - margin || lo > band + margin) return 0.0;
        if (lo > -band + margin && hi < band - margin) return h;
        return Bridge(x, y, h).time_in(-band, band);
    }

private:
    double inv_theta_, rate_, band_;
    LocalTimeEstimator est_;
};

/// Clock of the prelimit two-point difference: A(u) = (1/2) int_0^u m(B_s) ds
/// with m the speed density. m = f_inf + p where p is concentrated within the
/// core width; the p part is integrated exactly in conditional expectation over
/// each Brownian bridge step.
class PrelimitClock {
public:
    PrelimitClock(const ScaledModel& s, double h, double band, bool psi_off = false)
        : f_inf_(psi_off ? 1.0 : 1.0 / (1.0 + s.beta())), band_(band), psi_off_(psi_off) {
        if (psi_off) return;
        if (band > 0.0 && band < s.core_width())
            throw Error("prelimit clock: band must contain the core width " + std::to_string(s.core_width()));
        double beta = s.beta();
        ScaledModel model = s;
        table_ = std::make_shared<BridgeSpikeTable>(
            [model, beta](double z) {
                double q = model.one_minus_psi(z);
                return (1.0 - q) / ((beta + q) * (1.0 + beta));
            },
            s.spike_width(), s.core_width(), h);
    }

    ClockIncrement step(double x, double y, double h) const {
        ClockIncrement inc;
        double spike = 0.0;
        if (!psi_off_) {
            if (h != table_->step()) throw Error("prelimit clock: step differs from the table step");
            spike = table_->integral(x, y);
        }
        inc.total = 0.5 * (f_inf_ * h + spike);
        inc.band = 0.5 * (f_inf_ * StickyClock::band_time(x, y, h, band_) + spike);
        return inc;
    }

    /// Mass of the p part, which tends to pi / (ab).
    double excess_mass() const { return psi_off_ ? 0.0 : table_->mass(); }
    const BridgeSpikeTable* table() const { return table_.get(); }

private:
    double f_inf_, band_;
    bool psi_off_;
    std::shared_ptr<const BridgeSpikeTable> table_;
};

/// Occupation summaries of one clock run up to time `horizon`.
struct ClockTotals {
    double band = 0.0;
    double zero = 0.0;
    double endpoint = 0.0;  // Z(horizon), interpolated linearly in the step
    bool reached = false;
};

/// Runs several clocks off one Brownian path from z0 with step h until all of
/// them reach `horizon`, so the resulting processes are coupled through B.
template <typename... Clocks>
std::array<ClockTotals, sizeof...(Clocks)> run_coupled(double z0, double horizon, double h, Stream& rng,
                                                       std::size_t max_steps, const Clocks&... clocks) {
    constexpr std::size_t K = sizeof...(Clocks);
    std::array<ClockTotals, K> out{};
    std::array<double, K> clock{};
    double x = z0;
    double sh = std::sqrt(h);
    std::size_t done = 0;
    for (std::size_t step = 0; step < max_steps && done < K; ++step) {
        double y = x + sh * rng.normal();
        std::size_t idx = 0;
        auto advance = [&](const auto& c) {
            auto& tot = out[idx];
            if (!tot.reached) {
                ClockIncrement inc = c.step(x, y, h);
                double before = clock[idx];
                if (before + inc.total >= horizon) {
                    double f = inc.total > 0.0 ? (horizon - before) / inc.total : 0.0;
                    tot.band += f * inc.band;
                    tot.zero += f * inc.zero;
                    tot.endpoint = x + f * (y - x);
                    tot.reached = true;
                    ++done;
                } else {
                    tot.band += inc.band;
                    tot.zero += inc.zero;
                }
                clock[idx] = before + inc.total;
            }
            ++idx;
        };
        (advance(clocks), ...);
        x = y;
    }
    if (done < K) throw Error("time change: horizon not reached within the step budget");
    return out;
}

/// A time-changed path sampled on a uniform output grid. Each Brownian step
/// is mapped to its clock interval; a zero lump (sticky clocks) is placed at
/// the crossing of 0, or at the endpoint nearer to 0.
struct TimeChangedPath {
    std::vector<double> values;
    std::vector<unsigned char> at_zero;
    double zero_time = 0.0;
    std::size_t bm_steps = 0;
};

template <typename Clock>
TimeChangedPath time_changed_path(const Clock& clock, double z0, double horizon, double dt, double h, Stream& rng,
                                  std::size_t max_steps) {
    std::size_t n_out = static_cast<std::size_t>(std::llround(horizon / dt));
    TimeChangedPath path;
    path.values.assign(n_out + 1, 0.0);
    path.at_zero.assign(n_out + 1, 0);
    path.values[0] = z0;
    path.at_zero[0] = z0 == 0.0 ? 1 : 0;
    double a = 0.0, x = z0, sh = std::sqrt(h);
    std::size_t next = 1;
    std::size_t steps = 0;
    while (next <= n_out) {
        if (steps >= max_steps) throw Error("time change: horizon not reached within the step budget");
        double y = x + sh * rng.normal();
        ++steps;
        ClockIncrement inc = clock.step(x, y, h);
        double smooth = inc.total - inc.zero;
        // Position of the lump as a fraction of the step.
        double cut = (x > 0.0) != (y > 0.0) && x != y ? std::abs(x) / std::abs(y - x) : (std::abs(x) <= std::abs(y) ? 0.0 : 1.0);
        double t_lump = a + cut * smooth;
        double t_end = a + inc.total;
        while (next <= n_out && static_cast<double>(next) * dt <= t_end) {
            double t = static_cast<double>(next) * dt;
            std::size_t i = next;
            if (inc.zero > 0.0 && t >= t_lump && t < t_lump + inc.zero) {
                path.values[i] = 0.0;
                path.at_zero[i] = 1;
            } else {
                double frac = smooth > 0.0 ? (t < t_lump ? (t - a) / smooth : (t - a - inc.zero) / smooth) : 1.0;
                frac = std::clamp(frac, 0.0, 1.0);
                path.values[i] = x + frac * (y - x);
            }
            ++next;
        }
        if (t_end > horizon) {
            path.zero_time += std::clamp(horizon - t_lump, 0.0, inc.zero);
        } else {
            path.zero_time += inc.zero;
        }
        a = t_end;
        x = y;
        if (a > horizon) break;
    }
    path.bm_steps = steps;
    return path;
}

} // namespace sticky
