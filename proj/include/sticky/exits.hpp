#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <numbers>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "sticky/covariance.hpp"
#include "sticky/error.hpp"
#include "sticky/npoint.hpp"
#include "sticky/parallel.hpp"
#include "sticky/rng.hpp"
#include "sticky/stats.hpp"
#include "sticky/timechange.hpp"

namespace sticky {

enum class ExitMethod { euler, timechange };

inline std::string to_string(ExitMethod m) { return m == ExitMethod::euler ? "euler" : "timechange"; }

/// Exit from D(epsilon) = {max_ij (x_i - x_j) < epsilon} started on the diagonal.
struct ExitExperiment {
    SimConfig sim;
    double epsilon = 0.1;
    double cluster_gap = 0.0;  // 0 means epsilon / 50
    std::size_t replicas = 1000;
    ExitMethod method = ExitMethod::euler;
    double bm_step = 1e-6;      // driving Brownian step of the time-change route
    std::size_t max_steps = 50'000'000;
    unsigned workers = 1;

    explicit ExitExperiment(SimConfig s) : sim(std::move(s)) {}

    double gap() const { return cluster_gap > 0.0 ? cluster_gap : epsilon / 50.0; }

    std::vector<std::string> validate() const {
        auto warnings = sim.validate();
        if (!(epsilon > 0.0)) throw Error("exits: epsilon must be positive");
        if (replicas < 2) throw Error("exits: need at least two replicas");
        if (method == ExitMethod::timechange && sim.N != 2) throw Error("exits: the time-change route needs N = 2");
        for (double x : sim.x0)
            if (x != sim.x0[0]) throw Error("exits: the start must lie on the diagonal");
        if (gap() > epsilon / 10.0) warnings.push_back("cluster_gap exceeds epsilon / 10");
        return warnings;
    }
};

/// One replica's exit: time, upper-cluster bitmask (0 when more than two
/// clusters were found) and the number of clusters.
struct ExitRecord {
    double time = 0.0;
    std::uint32_t upper = 0;
    int clusters = 0;
    bool budget_exceeded = false;
    double smallest_gap = 0.0;  // closest pair of neighbours at exit
};

struct ExitStats {
    int N = 0;
    double epsilon = 0.0;
    std::vector<ExitRecord> records;

    std::size_t completed() const {
        return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const ExitRecord& r) { return !r.budget_exceeded; }));
    }
    std::size_t budget_exceeded() const { return records.size() - completed(); }

    Estimate mean_exit_time() const {
        std::vector<double> t;
        for (const auto& r : records)
            if (!r.budget_exceeded) t.push_back(r.time);
        return mean_estimate(t);
    }

    /// Proportion of completed replicas in the given ordered bipartition.
    Estimate cell_probability(std::uint32_t upper) const { return proportion([&](const ExitRecord& r) { return r.clusters == 2 && r.upper == upper; }); }
    Estimate multi_cluster_probability() const { return proportion([](const ExitRecord& r) { return r.clusters > 2; }); }

    /// All ordered bipartitions (upper masks) in increasing order.
    std::vector<std::uint32_t> cells() const {
        std::vector<std::uint32_t> out;
        std::uint32_t full = (1u << N) - 1u;
        for (std::uint32_t m = 1; m < full; ++m) out.push_back(m);
        return out;
    }

private:
    template <typename Pred>
    Estimate proportion(Pred pred) const {
        std::vector<double> x;
        for (const auto& r : records)
            if (!r.budget_exceeded) x.push_back(pred(r) ? 1.0 : 0.0);
        return mean_estimate(x);
    }
};

inline std::string describe_bipartition(int N, std::uint32_t upper) {
    std::string up, down;
    for (int i = 0; i < N; ++i) {
        auto& s = (upper >> i & 1u) ? up : down;
        if (!s.empty()) s += ",";
        s += std::to_string(i + 1);
    }
    return "{" + up + "}>{" + down + "}";
}

/// Single-linkage clusters of x with gap threshold `gap`: (count, bitmask of the top cluster).
inline std::pair<int, std::uint32_t> classify_exit(std::span<const double> x, double gap) {
    std::vector<int> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int p, int q) { return x[static_cast<std::size_t>(p)] < x[static_cast<std::size_t>(q)]; });
    int clusters = 1;
    std::uint32_t top = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (k > 0 && x[static_cast<std::size_t>(order[k])] - x[static_cast<std::size_t>(order[k - 1])] > gap) {
            ++clusters;
            top = 0;
        }
        top |= 1u << order[k];
    }
    return {clusters, top};
}

namespace detail {

inline double max_gap(std::span<const double> y) {
    auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    return *hi - *lo;
}

inline double smallest_spacing(std::vector<double> y) {
    std::sort(y.begin(), y.end());
    double out = INFINITY;
    for (std::size_t i = 1; i < y.size(); ++i) out = std::min(out, y[i] - y[i - 1]);
    return out;
}

/// Probability that a Brownian bridge with variance rate `rate` over time dt
/// from g0 to g1 (both below level) touches level.
inline double bridge_cross(double g0, double g1, double level, double rate, double dt) {
    if (g0 >= level || g1 >= level) return 1.0;
    return std::exp(-2.0 * (level - g0) * (level - g1) / (rate * dt));
}

inline ExitRecord exit_euler(const ExitExperiment& e, std::uint64_t seed) {
    SimConfig cfg = e.sim;
    cfg.seed = seed;
    NPointStepper stepper(cfg);
    Stream coin(seed, "exit-bridge", 0);
    std::vector<double> y(static_cast<std::size_t>(cfg.N), 0.0);
    double g0 = 0.0, t = 0.0;
    for (std::size_t k = 1; k <= e.max_steps; ++k) {
        stepper.step(y, cfg.dt);
        t += cfg.dt;
        double g1 = max_gap(y);
        // The extreme pair is far apart near the boundary, so its difference has variance rate about 2.
        bool exited = g1 >= e.epsilon || coin.uniform() < bridge_cross(g0, g1, e.epsilon, 2.0 * (1.0 + cfg.scaled.beta()), cfg.dt);
        if (exited) {
            auto [c, top] = classify_exit(y, e.gap());
            return {t, c == 2 ? top : 0u, c, false, smallest_spacing(y)};
        }
        g0 = g1;
    }
    return {t, 0u, 0, true};
}

/// N = 2 through Z = B(tau): T = A(sigma) with sigma the exit time of B from (-eps, eps).
inline ExitRecord exit_timechange(const ExitExperiment& e, const PrelimitClock& clock, std::uint64_t seed) {
    Stream rng(seed, "exit-timechange", 0);
    double h = e.bm_step, sh = std::sqrt(h), eps = e.epsilon;
    double x = 0.0, a = 0.0;
    for (std::size_t k = 1; k <= e.max_steps; ++k) {
        double y = x + sh * rng.normal();
        ClockIncrement inc = clock.step(x, y, h);
        if (std::abs(y) >= eps) {
            double frac = (eps - std::abs(x)) / (std::abs(y) - std::abs(x));
            if ((x >= 0.0) != (y >= 0.0)) frac = 1.0;
            a += std::clamp(frac, 0.0, 1.0) * inc.total;
            return {a, y > 0.0 ? 1u : 2u, 2, false, eps};
        }
        double up = bridge_cross(x, y, eps, 1.0, h), down = bridge_cross(-x, -y, eps, 1.0, h);
        double u = rng.uniform();
        if (u < up + down) {
            a += 0.5 * inc.total;
            return {a, u < up ? 1u : 2u, 2, false, eps};
        }
        a += inc.total;
        x = y;
    }
    return {a, 0u, 0, true};
}

} // namespace detail

/// Runs all replicas; replica i uses the seed derived from (sim.seed, "exits", i).
inline ExitStats run_exits(const ExitExperiment& e) {
    e.validate();
    ExitStats stats;
    stats.N = e.sim.N;
    stats.epsilon = e.epsilon;
    std::unique_ptr<PrelimitClock> clock;
    if (e.method == ExitMethod::timechange) clock = std::make_unique<PrelimitClock>(e.sim.scaled, e.bm_step, 0.0);
    stats.records = parallel_map(e.replicas, e.workers, [&](std::size_t i) {
        std::uint64_t seed = derive_seed(e.sim.seed, "exits", i);
        return e.method == ExitMethod::euler ? detail::exit_euler(e, seed) : detail::exit_timechange(e, *clock, seed);
    });
    return stats;
}

struct ThetaEstimate {
    int k = 0;
    int l = 0;
    Estimate value;
};

/// Inverts the exit asymptotics: sum_k C(N,k) theta(k:N-k) = eps / (2 E T) and
/// theta(|I|:|J|) = P(I, J) times that sum. Classes (k, N-k) pool their C(N,k)
/// cells. Standard errors by the delta method on the joint replica sample.
inline std::vector<ThetaEstimate> estimate_theta(const ExitStats& stats, double epsilon) {
    std::vector<double> t;
    for (const auto& r : stats.records)
        if (!r.budget_exceeded) t.push_back(r.time);
    if (t.size() < 2) throw Error("estimate_theta: too few completed replicas");
    double R = static_cast<double>(t.size());
    double tbar = pairwise_sum(t) / R;
    std::vector<ThetaEstimate> out;
    int N = stats.N;
    for (int k = 1; k < N; ++k) {
        double binom = std::round(std::exp(std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0)));
        std::vector<double> ind;
        for (const auto& r : stats.records)
            if (!r.budget_exceeded) ind.push_back(r.clusters == 2 && std::popcount(r.upper) == k ? 1.0 : 0.0);
        double pbar = pairwise_sum(ind) / R;
        if (pbar == 0.0) throw Error("estimate_theta: no exits into class (" + std::to_string(k) + "," + std::to_string(N - k) + ")");
        double cpp = 0.0, ctt = 0.0, cpt = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            double dp = ind[i] - pbar, dt = t[i] - tbar;
            cpp += dp * dp;
            ctt += dt * dt;
            cpt += dp * dt;
        }
        cpp /= R - 1.0;
        ctt /= R - 1.0;
        cpt /= R - 1.0;
        double value = epsilon * pbar / (2.0 * binom * tbar);
        double gp = value / pbar, gt = -value / tbar;
        double var = (gp * gp * cpp + gt * gt * ctt + 2.0 * gp * gt * cpt) / R;
        out.push_back({k, N - k, {value, std::sqrt(std::max(var, 0.0))}});
    }
    return out;
}

/// gamma = sqrt(2/pi) Gamma(N/2) / Gamma((N-1)/2).
inline double gamma_const(int N) {
    if (N < 2) throw Error("gamma_const: N must be >= 2");
    return std::sqrt(2.0 / std::numbers::pi) * std::exp(std::lgamma(N / 2.0) - std::lgamma((N - 1) / 2.0));
}

struct RadialTable {
    std::vector<double> r;
    std::vector<double> f;
    std::vector<double> df;
};

/// Solves (b^2/2 + a^2 r^2) f'' + ((N-2) b^2 / (2r)) f' = 1 with f(0) = 0 from
/// the series f = r^2 / (b^2 (N-1)) + O(r^4) near the regular singular point,
/// then by adaptive Dormand-Prince integration through the sorted grid.
inline RadialTable radial_f0(int N, double a, double b, std::vector<double> grid, double rel_tol = 1e-12) {
    if (N < 2) throw Error("radial_f0: N must be >= 2");
    if (!(a > 0.0) || !(b > 0.0)) throw Error("radial_f0: a and b must be positive");
    std::sort(grid.begin(), grid.end());
    if (grid.empty() || grid.front() < 0.0) throw Error("radial_f0: grid must be nonempty and nonnegative");
    double b2 = b * b, a2 = a * a, m = N - 1.0;
    // Second series term: f = c2 r^2 + c4 r^4 with c4 = -a^2 c2 / ((N+1) b^2).
    double c2 = 1.0 / (b2 * m), c4 = -a2 * c2 / ((N + 1.0) * b2);
    double r0 = std::min(1e-4 * b / a, grid.front() > 0.0 ? grid.front() : 1e-4 * b / a);
    using State = std::array<double, 2>;
    State s{c2 * r0 * r0 + c4 * r0 * r0 * r0 * r0, 2.0 * c2 * r0 + 4.0 * c4 * r0 * r0 * r0};
    auto rhs = [&](const State& y, State& dy, double r) {
        dy[0] = y[1];
        dy[1] = (1.0 - (N - 2.0) * b2 / (2.0 * r) * y[1]) / (b2 / 2.0 + a2 * r * r);
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-14, rel_tol, ode::runge_kutta_dopri5<State>());
    RadialTable out;
    double r = r0;
    for (double target : grid) {
        if (target <= r0) {
            out.r.push_back(target);
            out.f.push_back(c2 * target * target + c4 * std::pow(target, 4));
            out.df.push_back(2.0 * c2 * target + 4.0 * c4 * std::pow(target, 3));
            continue;
        }
        try {
            ode::integrate_adaptive(stepper, rhs, s, r, target, (target - r) / 100.0);
        } catch (const std::exception& ex) {
            throw Error(std::string("radial_f0: step-size failure: ") + ex.what());
        }
        r = target;
        out.r.push_back(target);
        out.f.push_back(s[0]);
        out.df.push_back(s[1]);
    }
    return out;
}

struct BallCheck {
    int N = 0;
    double predicted = 0.0;   // eps / (n gamma a b)
    double exact = 0.0;       // f0(n eps) / n^2 from the radial ODE
    Estimate mean_exit_time;
    double kuiper_statistic = 0.0;
    double kuiper_p = 1.0;
    bool uniformity_tested = false;
    std::string status;
    std::size_t budget_exceeded = 0;
};

/// First exit of the projection of the prelimit N-point motion onto the
/// hyperplane sum x_i = 0 from the ball of radius eps / n.
inline BallCheck ball_exit_time_check(int N, double a, double b, int n, double epsilon, std::size_t replicas,
                                      std::uint64_t seed, double dt_factor = 0.05, unsigned workers = 1,
                                      std::size_t max_steps = 10'000'000) {
    if (N < 2) throw Error("ballcheck: N must be >= 2");
    if (!(epsilon > 0.0)) throw Error("ballcheck: epsilon must be positive");
    ScaledModel s(CovarianceModel::gaussian(a), n, b);
    SimConfig cfg(s);
    cfg.N = N;
    cfg.x0.assign(static_cast<std::size_t>(N), 0.0);
    cfg.dt = dt_factor / (a * a * double(n) * n);
    cfg.horizon = 1.0;
    double radius = epsilon / n;
    BallCheck out;
    out.N = N;
    out.predicted = epsilon / (n * gamma_const(N) * a * b);
    out.exact = radial_f0(N, a, b, {n * epsilon}).f[0] / (double(n) * n);
    if (radius > s.core_width()) {
        out.status = "skipped: the ball is not inside the correlated core, so psi is negligible along the path";
        return out;
    }
    struct Hit {
        double t = 0.0;
        std::vector<double> dir;
        bool ok = false;
    };
    auto hits = parallel_map(replicas, workers, [&](std::size_t i) {
        SimConfig c = cfg;
        c.seed = derive_seed(seed, "ballcheck", i);
        NPointStepper st(c);
        std::vector<double> y(static_cast<std::size_t>(N), 0.0), proj(y.size());
        Hit h;
        for (std::size_t k = 1; k <= max_steps; ++k) {
            st.step(y, c.dt);
            double mean = std::accumulate(y.begin(), y.end(), 0.0) / N, r2 = 0.0;
            for (std::size_t j = 0; j < y.size(); ++j) {
                proj[j] = y[j] - mean;
                r2 += proj[j] * proj[j];
            }
            if (r2 >= radius * radius) {
                h.t = static_cast<double>(k) * c.dt;
                h.dir = proj;
                h.ok = true;
                return h;
            }
        }
        return h;
    });
    std::vector<double> times, angles;
    for (const auto& h : hits) {
        if (!h.ok) {
            ++out.budget_exceeded;
            continue;
        }
        times.push_back(h.t);
        if (N == 3) {
            // Orthonormal basis of the plane x1 + x2 + x3 = 0.
            double u = (h.dir[0] - h.dir[1]) / std::numbers::sqrt2;
            double v = (h.dir[0] + h.dir[1] - 2.0 * h.dir[2]) / std::sqrt(6.0);
            double ang = std::atan2(v, u) / (2.0 * std::numbers::pi);
            angles.push_back(ang < 0.0 ? ang + 1.0 : ang);
        }
    }
    out.mean_exit_time = mean_estimate(times);
    if (N == 3 && angles.size() >= 2) {
        auto k = kuiper_uniform(angles);
        out.kuiper_statistic = k.statistic;
        out.kuiper_p = k.p_value;
        out.uniformity_tested = true;
    }
    out.status = "ok";
    return out;
}

} // namespace sticky
