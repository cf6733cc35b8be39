#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "sticky/theta.hpp"

using namespace sticky;

namespace {

// High-precision reference values computed offline with mpmath at 30 digits.
constexpr double theta11 = 0.159154943091895335768883763373;
constexpr double theta12 = 0.0795774715459476678844418816863;
constexpr double theta22 = 0.0279284546790792649354505647764;
constexpr double theta13 = 0.0516490168668684029489913169099;
constexpr double theta23 = 0.0139642273395396324677252823882;

// Brute-force oracle: plain midpoint rule for the splitting-point integral.
double midpoint_oracle(int k, int l) {
    const int m = 400000;
    double lo = -12.0, h = 24.0 / m, s = 0.0;
    for (int i = 0; i < m; ++i) s += split_integrand(k, l, lo + (i + 0.5) * h);
    return s * h / (2.0 * std::sqrt(std::numbers::pi));
}

} // namespace

TEST(ThetaQuadrature, ClosedFormAnchor) {
    EXPECT_NEAR(theta_quadrature(1, 1, 1.0, 1.0).value, 1.0 / (2.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(theta_quadrature(1, 1, 2.0, 3.5).value, 7.0 / (2.0 * std::numbers::pi), 1e-11);
}

TEST(ThetaQuadrature, ReferenceValues) {
    EXPECT_NEAR(theta_quadrature(1, 2, 1, 1).value, theta12, 1e-12);
    EXPECT_NEAR(theta_quadrature(2, 2, 1, 1).value, theta22, 1e-12);
    EXPECT_NEAR(theta_quadrature(1, 3, 1, 1).value, theta13, 1e-12);
    EXPECT_NEAR(theta_quadrature(3, 1, 1, 1).value, theta13, 1e-12);
    EXPECT_NEAR(theta_quadrature(2, 3, 1, 1).value, theta23, 1e-12);
}

TEST(ThetaQuadrature, AgreesWithMidpointOracle) {
    for (auto [k, l] : {std::pair{1, 1}, {2, 1}, {2, 2}, {4, 3}})
        EXPECT_NEAR(theta_quadrature(k, l, 1, 1).value, midpoint_oracle(k, l), 1e-11);
}

TEST(ThetaQuadrature, ErrorBoundReported) {
    auto v = theta_quadrature(2, 5, 1, 1, 1e-9);
    EXPECT_LE(v.error_bound, 1e-9);
    EXPECT_THROW(theta_quadrature(1, 1, 1, 1, 1e-40), QuadratureError);
    EXPECT_THROW(quad::adaptive([](double x) { return std::sin(x); }, 0.0, 10.0, 1e-20, 50), QuadratureError);
    EXPECT_THROW(theta_quadrature(0, 1, 1, 1), Error);
}

TEST(ThetaMonteCarlo, MatchesClosedForm) {
    auto e = theta_montecarlo(1, 1, 1, 1, 1'000'000, 42);
    EXPECT_LT(std::abs(e.z_score(theta11)), 3.0);
    EXPECT_GT(e.stderr, 0.0);
}

TEST(ThetaMonteCarlo, MatchesQuadrature31) {
    auto e = theta_montecarlo(3, 1, 1, 1, 1'000'000, 43);
    EXPECT_LT(std::abs(e.z_score(theta_quadrature(3, 1, 1, 1).value)), 3.0);
}

TEST(ThetaMonteCarlo, LinearInAbWithCommonSeed) {
    auto e1 = theta_montecarlo(2, 1, 1, 1, 100000, 5);
    auto e2 = theta_montecarlo(2, 1, 2, 5, 100000, 5);
    EXPECT_DOUBLE_EQ(e2.value / e1.value, 10.0);
}

TEST(ThetaMonteCarlo, IndependentOfWorkerCount) {
    auto e1 = theta_montecarlo(1, 2, 1, 1, 300000, 9, 1);
    auto e3 = theta_montecarlo(1, 2, 1, 1, 300000, 9, 3);
    EXPECT_EQ(e1.value, e3.value);
    EXPECT_EQ(e1.stderr, e3.stderr);
}

TEST(SplittingMeasure, DensitySymmetricWithSlowEndpointDecay) {
    SplittingMeasure nu{1.0, 1.0};
    for (double q : {0.01, 0.2, 0.37, 0.5}) EXPECT_NEAR(nu.density(q), nu.density(1.0 - q), 1e-12 * nu.density(q));
    // q / phi(Phi^{-1}(q)) behaves like 1 / |Phi^{-1}(q)| near 0.
    for (double q : {1e-6, 1e-12, 1e-30}) {
        double z = std::abs(normal::quantile(q));
        EXPECT_NEAR(nu.density(q) * z / theta_prefactor(1.0, 1.0), 1.0, 1.5 / (z * z));
    }
    EXPECT_NEAR(nu.density(1e-12, 1.0 - 1e-12), nu.density(1.0 - 1e-12, 1e-12), 1e-12);
}

TEST(ThetaFromNu, MatchesQuadrature) {
    EXPECT_NEAR(theta_from_nu(1, 1, 1, 1).value, theta11, 2e-12);
    EXPECT_NEAR(theta_from_nu(2, 1, 1, 1).value, theta12, 2e-12);
    EXPECT_NEAR(theta_from_nu(1, 1, 3, 0.7).value, theta_quadrature(1, 1, 3, 0.7).value, 2e-12);
    EXPECT_NEAR(theta_from_nu(2, 2, 1, 1).value, theta22, 2e-12);
}

TEST(ThetaFamily, SingleEntry) {
    auto f = build_family(2, 1, 1, ThetaMethod::quadrature);
    EXPECT_EQ(f.entries().size(), 1u);
    EXPECT_NEAR(f(1, 1), theta11, 1e-13);
}

TEST(ThetaFamily, ConsistencySymmetryMonotonicity) {
    auto f = build_family(9, 1.3, 0.8, ThetaMethod::quadrature);
    EXPECT_LE(f.consistency_residual(), 1e-10);
    for (const auto& [kl, v] : f.entries()) {
        auto [k, l] = kl;
        EXPECT_EQ(v.value, f(l, k));
        EXPECT_GE(v.value, 0.0);
        if (k + l < 9) {
            EXPECT_LE(f(k + 1, l), v.value);
            EXPECT_LE(f(k, l + 1), v.value);
        }
    }
}

TEST(ThetaFamily, LinearInAb) {
    auto f1 = build_family(6, 1, 1, ThetaMethod::quadrature);
    auto f2 = build_family(6, 2.5, 1.5, ThetaMethod::quadrature);
    for (const auto& [kl, v] : f1.entries()) EXPECT_NEAR(f2(kl.first, kl.second), 3.75 * v.value, 1e-15);
}

TEST(ThetaFamily, TotalSplitRateN3) {
    auto f = build_family(4, 1, 1, ThetaMethod::quadrature);
    EXPECT_NEAR(f.total_split_rate(2), 2.0 * theta11, 1e-13);
    EXPECT_NEAR(f.total_split_rate(3), 6.0 * theta12, 1e-13);
    EXPECT_NEAR(f.total_split_rate(4), 8.0 * theta13 + 6.0 * theta22, 1e-13);
}

TEST(ThetaFamily, OtherMethods) {
    auto nu = build_family(5, 1, 1, ThetaMethod::nu);
    EXPECT_NEAR(nu(2, 2), theta22, 1e-11);
    FamilyOptions opt;
    opt.samples = 200000;
    auto mc = build_family(4, 1, 1, ThetaMethod::montecarlo, opt);
    EXPECT_LT(std::abs(mc(1, 1) - theta11), mc.error_bound(1, 1));
}

TEST(ThetaFamily, MissingEntryAndBadNmax) {
    auto f = build_family(3, 1, 1, ThetaMethod::quadrature);
    EXPECT_THROW(f(2, 2), Error);
    EXPECT_THROW(build_family(1, 1, 1, ThetaMethod::quadrature), Error);
}

TEST(ThetaFamily, InvariantViolationNamesEntry) {
    ThetaFamily f(3, 1, 1, ThetaMethod::quadrature);
    f.set(1, 1, {0.2, 0.0});
    f.set(1, 2, {0.05, 0.0});
    f.set(2, 1, {0.05, 0.0});
    try {
        f.check_invariants(1e-10);
        FAIL() << "expected an invariant error";
    } catch (const InvariantError& e) {
        EXPECT_NE(std::string(e.what()).find("theta(1:1)"), std::string::npos);
    }
}
