#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "sticky/martingale.hpp"
#include "sticky/sticky_ref.hpp"

using namespace sticky;

namespace {

/// Embeds a one-dimensional path Z as the two-point path (Z, 0).
Path as_pair(const Path& z) {
    Path p;
    p.N = 2;
    p.dt = z.dt;
    p.times = z.times;
    for (std::size_t k = 0; k < z.rows(); ++k) {
        p.states.push_back(z.states[k]);
        p.states.push_back(0.0);
    }
    return p;
}

} // namespace

TEST(DriftResidual, LinearFunctionHasNoCompensator) {
    auto theta = build_family(2, 1.0, 1.0, ThetaMethod::quadrature);
    auto f = PiecewiseLinearFn::linear({1.0, -1.0});
    Path p;
    p.N = 2;
    p.times = {0.0, 0.1, 0.2};
    p.states = {0.0, 0.0, 0.3, 0.1, -0.2, 0.4};
    double comp = 1.0;
    EXPECT_NEAR(drift_residual(p, f, theta, 0.0, &comp), -0.6, 1e-15);
    EXPECT_NEAR(comp, 0.0, 1e-15);
}

TEST(DriftResidual, StickyPairSolvesMartingaleProblem) {
    // Z = X1 - X2 is sticky at 0 with variance rate 2 and stickiness ab/pi.
    const double a = 1.0, b = 1.0;
    auto theta = build_family(2, a, b, ThetaMethod::quadrature);
    auto f = PiecewiseLinearFn::abs_diff(2, 0, 1);
    std::vector<Path> paths;
    for (std::uint64_t r = 0; r < 2000; ++r) {
        StickyParams sp;
        sp.theta = a * b / std::numbers::pi;
        sp.variance_rate = 2.0;
        sp.horizon = 0.5;
        sp.dt = 1e-3;
        sp.bm_step = 2.5e-5;
        sp.seed = derive_seed(11, "pair", r);
        paths.push_back(as_pair(simulate_sticky(sp)));
    }
    auto d = drift_test(paths, f, theta, 0.0);
    EXPECT_LT(std::abs(d.z), 3.0) << d.mean << " +- " << d.stderr;
    EXPECT_GT(d.mean_compensator, 0.0);

    // Without the compensator the increment of |Z| is clearly biased upward.
    EXPECT_GT(d.mean_increment / d.stderr, 10.0);
}

TEST(DriftTest, RejectsBadInput) {
    auto theta = build_family(2, 1.0, 1.0, ThetaMethod::quadrature);
    auto f = PiecewiseLinearFn::abs_diff(3, 0, 1);
    Path p;
    p.N = 2;
    p.times = {0.0, 0.1};
    p.states = {0.0, 0.0, 0.1, 0.0};
    EXPECT_THROW(drift_residual(p, f, theta, 0.0), Error);
    std::vector<Path> one{p};
    EXPECT_THROW(drift_test(one, PiecewiseLinearFn::abs_diff(2, 0, 1), theta, 0.0), Error);
}

TEST(RunDriftTest, PrelimitPairAndWorkerIndependence) {
    const double a = 1.0, b = 10.0;
    const int n = 100;
    SimConfig sim(ScaledModel(CovarianceModel::gaussian(a), n, b));
    sim.N = 2;
    sim.x0 = {0.0, 0.0};
    sim.dt = 0.05 / (a * a * n * n);
    sim.horizon = 0.02;
    sim.record_every = 10;
    sim.seed = 5;
    auto theta = build_family(2, a, b, ThetaMethod::quadrature);
    std::vector<PiecewiseLinearFn> fs{PiecewiseLinearFn::abs_diff(2, 0, 1), PiecewiseLinearFn::linear({1.0, 1.0})};
    auto one = run_drift_test(sim, fs, theta, 3.0 / (a * n), 600, 1);
    EXPECT_LT(std::abs(one[0].z), 3.0) << one[0].mean << " +- " << one[0].stderr;
    EXPECT_LT(std::abs(one[1].z), 3.0);
    EXPECT_EQ(one[1].mean_compensator, 0.0);
    auto two = run_drift_test(sim, fs, theta, 3.0 / (a * n), 600, 3);
    EXPECT_EQ(one[0].mean, two[0].mean);
    EXPECT_EQ(one[1].stderr, two[1].stderr);
}
