// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 5 7        selected criteria
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "sticky/sticky.hpp"

using namespace sticky;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [failed]");
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string pm(const Estimate& e, const char* f = "%.5g") { return fmt(f, e.value) + " +- " + fmt(f, e.stderr); }

unsigned workers() { return default_workers(); }

Outcome theta_anchor() {
    Outcome o;
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}, std::pair{0.3, 7.0}}) {
        double err = std::abs(theta_quadrature(1, 1, a, b).value - a * b / (2.0 * pi));
        o.require(err <= 1e-10, "a=" + fmt("%g", a) + " b=" + fmt("%g", b) + " err " + fmt("%.1e", err));
    }
    return o;
}

Outcome theta_consistency() {
    Outcome o;
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}}) {
        auto fam = build_family(8, a, b, ThetaMethod::quadrature);
        double asym = 0.0;
        for (const auto& [kl, v] : fam.entries()) asym = std::max(asym, std::abs(v.value - fam(kl.second, kl.first)));
        o.require(fam.consistency_residual() <= 1e-10, "consistency " + fmt("%.1e", fam.consistency_residual()));
        o.require(asym == 0.0, "symmetry " + fmt("%.1e", asym));
    }
    return o;
}

Outcome theta_three_way() {
    Outcome o;
    const double tol = 1e-12;
    for (auto [k, l] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{2, 2}, std::pair{1, 3}}) {
        double q = theta_quadrature(k, l, 1.0, 1.0, tol).value;
        Estimate mc = theta_montecarlo(k, l, 1.0, 1.0, 10'000'000, derive_seed(3, "acceptance-theta", static_cast<std::uint64_t>(10 * k + l)),
                                       workers());
        double nu = theta_from_nu(k, l, 1.0, 1.0, tol).value;
        std::string name = "(" + std::to_string(k) + ":" + std::to_string(l) + ")";
        o.require(std::abs(mc.z_score(q)) <= 3.0, name + " mc z " + fmt("%.2f", mc.z_score(q)));
        o.require(std::abs(nu - q) <= 2.0 * tol, name + " nu diff " + fmt("%.1e", nu - q));
    }
    return o;
}

Outcome speed_measure() {
    Outcome o;
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}}) {
        ScaledModel s(CovarianceModel::gaussian(a), 10'000, b);
        double m = speed_measure_mass(s, 1.0), target = 2.0 + pi / (a * b);
        o.require(std::abs(m / target - 1.0) <= 1e-3, "a=" + fmt("%g", a) + " rel " + fmt("%.1e", m / target - 1.0));
    }
    return o;
}

Outcome two_point_stickiness() {
    // One driving Brownian path per replica, shared by four clocks: the sticky
    // reference and the prelimit at n = 100 and n = 1000, each on its own band.
    Outcome o;
    const double h = 1e-4, theta = 1.0 / pi;
    const std::size_t R = 10'000;
    ScaledModel s2(CovarianceModel::gaussian(1.0), 100, 1.0), s3(CovarianceModel::gaussian(1.0), 1000, 1.0);
    StickyClock ref2(theta, 2.0, 10.0 / 100, LocalTimeEstimator::bridge), ref3(theta, 2.0, 10.0 / 1000, LocalTimeEstimator::bridge);
    PrelimitClock pre2(s2, h, 10.0 / 100), pre3(s3, h, 10.0 / 1000);
    auto rows = parallel_map(R, workers(), [&](std::size_t i) {
        Stream rng(5, "acceptance-band", i);
        return run_coupled(0.0, 1.0, h, rng, 100'000'000, ref2, pre2, ref3, pre3);
    });
    RunningStats band[4], diff2, diff3;
    for (const auto& r : rows) {
        for (int j = 0; j < 4; ++j) band[j].add(r[static_cast<std::size_t>(j)].band);
        diff2.add(r[1].band - r[0].band);
        diff3.add(r[3].band - r[2].band);
    }
    for (int j : {0, 2}) {
        double se = std::hypot(band[j].stderr(), band[j + 1].stderr());
        double d = band[j + 1].mean() - band[j].mean();
        o.require(std::abs(d) <= 3.0 * se, std::string(j == 0 ? "n=100" : "n=1000") + " prelimit " + pm(band[j + 1].estimate(), "%.4f") +
                                               " vs sticky " + pm(band[j].estimate(), "%.4f"));
    }
    o.require(std::abs(diff3.mean()) <= std::abs(diff2.mean()),
              "paired discrepancy n=1000 " + pm(diff3.estimate(), "%.2e") + " vs n=100 " + pm(diff2.estimate(), "%.2e"));
    return o;
}

Outcome exits_two_point() {
    Outcome o;
    SimConfig sim(ScaledModel(CovarianceModel::gaussian(1.0), 1000, 1.0));
    sim.N = 2;
    sim.x0 = {0.0, 0.0};
    sim.dt = 1e-8;
    sim.seed = 6;
    ExitExperiment e(sim);
    e.epsilon = 0.1;
    e.replicas = 10'000;
    e.method = ExitMethod::timechange;
    e.bm_step = 1e-6;
    e.workers = workers();
    auto st = run_exits(e);
    Estimate m = st.mean_exit_time();
    double ratio = m.value / e.epsilon, target = pi / 2.0;
    o.require(st.budget_exceeded() == 0, "budget exceeded " + std::to_string(st.budget_exceeded()));
    o.require(std::abs(ratio / target - 1.0) <= 0.1, "E[T]/eps " + fmt("%.4f", ratio) + " +- " + fmt("%.4f", m.stderr / e.epsilon) +
                                                         " vs pi/2 = " + fmt("%.4f", target));
    return o;
}

Outcome exits_three_point() {
    Outcome o;
    const double a = 1.0, b = 1.0;
    const int n = 1000;
    SimConfig sim(ScaledModel(CovarianceModel::gaussian(a), n, b));
    sim.N = 3;
    sim.x0 = {0.0, 0.0, 0.0};
    sim.dt = 0.0125 / (a * a * n * n);
    sim.seed = 7;
    ExitExperiment e(sim);
    e.epsilon = 0.025;
    e.cluster_gap = e.epsilon / 10.0;
    e.replicas = 2000;
    e.workers = workers();
    auto st = run_exits(e);
    o.require(st.budget_exceeded() == 0, "budget exceeded " + std::to_string(st.budget_exceeded()));
    double worst = 0.0;
    for (auto mask : st.cells()) {
        Estimate p = st.cell_probability(mask);
        double R = static_cast<double>(st.completed());
        double se = std::sqrt((1.0 / 6.0) * (5.0 / 6.0) / R);
        worst = std::max(worst, std::abs(p.value - 1.0 / 6.0) / se);
    }
    o.require(worst <= 3.0, "cells max |z| vs 1/6 " + fmt("%.2f", worst));
    for (const auto& t : estimate_theta(st, e.epsilon))
        if (t.k == 1) {
            double target = a * b / (4.0 * pi);
            o.require(std::abs(t.value.z_score(target)) <= 3.0, "theta(1:2) " + pm(t.value, "%.4f") + " vs " + fmt("%.4f", target));
        }
    Estimate multi = st.multi_cluster_probability();
    o.require(multi.value < 0.02, "more than two clusters " + fmt("%.2f%%", 100.0 * multi.value));
    o.detail += "; E[T]/eps " + fmt("%.4f", st.mean_exit_time().value / e.epsilon);
    return o;
}

Outcome radial_ode() {
    Outcome o;
    double closed[] = {std::numbers::sqrt2 / pi, 1.0 / std::numbers::sqrt2, 2.0 * std::numbers::sqrt2 / pi};
    for (int N = 2; N <= 4; ++N) {
        double g = gamma_const(N);
        o.require(std::abs(g - closed[N - 2]) <= 1e-10, "gamma(" + std::to_string(N) + ") err " + fmt("%.1e", std::abs(g - closed[N - 2])));
        const double a = 1.0, b = 1.0, r = 50.0 * b / a;
        double ratio = radial_f0(N, a, b, {r}).f[0] / r * (g * a * b);
        o.require(std::abs(ratio - 1.0) <= 0.01, "N=" + std::to_string(N) + " f0(r) gamma a b / r " + fmt("%.4f", ratio));
    }
    return o;
}

Outcome ball_exit() {
    Outcome o;
    auto bc = ball_exit_time_check(3, 1.0, 1.0, 1000, 0.05, 5000, 9, 0.05, workers());
    o.require(bc.status == "ok", "status " + bc.status);
    o.require(std::abs(bc.mean_exit_time.value / bc.predicted - 1.0) <= 0.1,
              "mean " + pm(bc.mean_exit_time, "%.4g") + " vs eps/(n gamma a b) " + fmt("%.4g", bc.predicted));
    o.require(bc.uniformity_tested && bc.kuiper_p >= 0.01, "Kuiper p " + fmt("%.3f", bc.kuiper_p));
    return o;
}

Outcome coalescing_exponent() {
    Outcome o;
    SplittingOptions opt;
    opt.workers = workers();
    auto fit = splitting_slope({1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4}, 1.0, 1'000'000, 10, opt);
    o.require(std::abs(fit.fit.slope - 3.0) <= 0.3, "slope " + fmt("%.3f", fit.fit.slope) + " +- " + fmt("%.3f", fit.fit.slope_stderr));
    return o;
}

Outcome martingale_drift() {
    Outcome o;
    const double a = 1.0, b = 10.0;
    const int n = 1000;
    SimConfig sim(ScaledModel(CovarianceModel::gaussian(a), n, b));
    sim.N = 3;
    sim.x0 = {0.0, 0.0, 0.0};
    sim.dt = 0.05 / (a * a * n * n);
    sim.horizon = 0.02;
    sim.record_every = 100;
    sim.seed = 11;
    auto theta = build_family(3, a, b, ThetaMethod::quadrature);
    std::vector<PiecewiseLinearFn> fs{PiecewiseLinearFn::abs_diff(3, 0, 1), PiecewiseLinearFn::hinge(3, {0}, {1, 2})};
    auto stats = run_drift_test(sim, fs, theta, 3.0 / (a * n), 2000, workers());
    const char* names[] = {"|x1-x2|", "hinge {1}>{2,3}"};
    for (std::size_t j = 0; j < stats.size(); ++j)
        o.require(std::abs(stats[j].z) <= 3.0, std::string(names[j]) + " z " + fmt("%.2f", stats[j].z) + " (increment " +
                                                   fmt("%.4f", stats[j].mean_increment) + ", compensator " +
                                                   fmt("%.4f", stats[j].mean_compensator) + ")");
    return o;
}

Outcome kernels() {
    Outcome o;
    ScaledModel fig(CovarianceModel::gaussian(20.0), 1, 0.375), sharp(CovarianceModel::gaussian(60.0), 1, 0.125);
    const double L = default_kernel_length(fig);
    const std::size_t M = 512;
    const double dt = spde_stable_dt(fig, L / M);

    {
        SpdeDiagnostics d;
        Stream rng(12, "acceptance-mass");
        spde_evolve(KernelField::point_mass(L, M, L / 2), fig, 10'000 * dt, dt, rng, {}, &d);
        o.require(d.flux_mass_drift <= 1e-10, "mass drift per 1e4 steps " + fmt("%.1e", d.flux_mass_drift));
    }
    {
        // No field: the kernel spreads as a Gaussian with variance rate 1 + b^2 / n^2.
        const double L8 = 8.0, sd0 = 0.1, t = 0.5;
        auto f0 = KernelField::gaussian(L8, M, L8 / 2, sd0);
        Stream rng(12, "acceptance-heat");
        SpdeOptions off;
        off.field_enabled = false;
        auto f = spde_evolve(f0, fig, t, spde_stable_dt(fig, f0.dx()), rng, off);
        double var = sd0 * sd0 + (1.0 + fig.beta()) * f.t;
        auto exact = KernelField::gaussian(L8, M, L8 / 2, std::sqrt(var));
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
            num += (f.v[i] - exact.v[i]) * (f.v[i] - exact.v[i]);
            den += exact.v[i] * exact.v[i];
        }
        double rel = std::sqrt(num / den);
        o.require(rel <= 0.01, "heat kernel relative L2 error " + fmt("%.1e", rel));
    }
    {
        double worst = 1.0;
        for (std::uint64_t seed : {1, 2}) {
            Stream f1(seed, "acceptance-field"), f2(seed, "acceptance-field"), particles(seed, "acceptance-particles");
            auto spde = spde_evolve(KernelField::point_mass(L, M, L / 2), fig, 1.0, dt, f1);
            FilterOptions opt;
            opt.particles = 5000;
            opt.cells = M;
            opt.length = L;
            opt.dt = dt;
            opt.substeps = 8;
            auto filt = filter_kernel(fig, L / 2, 1.0, f2, particles, opt);
            worst = std::min(worst, correlation(spde.v, filt.v));
        }
        o.require(worst >= 0.9, "filter vs SPDE bin correlation (worst of 2 fields) " + fmt("%.3f", worst));
    }
    {
        // Figure-1 comparison on a common grid and step.
        auto median_max = [&](const ScaledModel& s) {
            auto masses = parallel_map(50, workers(), [&](std::size_t seed) {
                Stream field(seed, "acceptance-figure"), particles(seed, "acceptance-figure-particles");
                FilterOptions opt;
                opt.particles = 2000;
                opt.cells = M;
                opt.length = L;
                opt.dt = 1e-5;
                return density_stats(filter_kernel(s, L / 2, 1.0, field, particles, opt)).max_mass;
            });
            return median(masses);
        };
        double m20 = median_max(fig), m60 = median_max(sharp);
        o.require(m60 > m20, "median max-bin mass a=60 " + fmt("%.4f", m60) + " vs a=20 " + fmt("%.4f", m20));
    }
    return o;
}

Outcome combinatorics() {
    Outcome o;
    // Ordered Bell (Fubini) numbers.
    const std::uint64_t fubini[] = {1, 1, 3, 13, 75, 541, 4683};
    for (int N = 1; N <= 6; ++N) {
        auto count = enumerate_cells(N).size();
        o.require(count == fubini[N] && ordered_bell(N) == fubini[N], "N=" + std::to_string(N) + " cells " + std::to_string(count));
    }
    auto theta = build_family(6, 1.0, 1.0, ThetaMethod::quadrature);
    bool exact = true;
    for (int N = 2; N <= 6; ++N)
        for (int k = 1; k < N; ++k) {
            std::vector<int> upper, lower;
            for (int i = 0; i < N; ++i) (i < k ? upper : lower).push_back(i);
            std::vector<double> zero(static_cast<std::size_t>(N), 0.0);
            exact = exact && apply_operator(PiecewiseLinearFn::hinge(N, upper, lower), zero, theta) == 2.0 * theta(k, N - k);
        }
    o.require(exact, "hinge operator equals 2 theta(k:l) exactly for all k + l <= 6");
    return o;
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "theta closed form", 1, theta_anchor},
        {2, "theta consistency and symmetry", 5, theta_consistency},
        {3, "theta three-way agreement", 120, theta_three_way},
        {4, "speed measure limit", 1, speed_measure},
        {5, "two-point stickiness convergence", 600, two_point_stickiness},
        {6, "exit asymptotics N=2", 600, exits_two_point},
        {7, "exit cells N=3", 1200, exits_three_point},
        {8, "radial ODE asymptotics", 5, radial_ode},
        {9, "ball exit", 600, ball_exit},
        {10, "coalescing exponent", 1800, coalescing_exponent},
        {11, "martingale-problem drift", 900, martingale_drift},
        {12, "kernels", 1800, kernels},
        {13, "combinatorics", 1, combinatorics},
    };
    return all;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    bool all_pass = true;
    for (const auto& c : criteria()) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(secs < c.budget_seconds, "runtime " + fmt("%.1f", secs) + " s of " + fmt("%.0f", c.budget_seconds));
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
