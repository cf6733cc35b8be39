#include <array>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "sticky/cells.hpp"
#include "sticky/rng.hpp"

using namespace sticky;

namespace {

ThetaFamily family(int nmax) { return build_family(nmax, 1.0, 1.0, ThetaMethod::quadrature); }

// Weak orderings counted by brute force: rank vectors in {0..N-1}^N whose
// used ranks form an initial segment.
std::uint64_t brute_force_weak_orderings(int N) {
    std::uint64_t count = 0, total = 1;
    for (int i = 0; i < N; ++i) total *= static_cast<std::uint64_t>(N);
    for (std::uint64_t code = 0; code < total; ++code) {
        std::vector<int> used(static_cast<std::size_t>(N), 0);
        std::uint64_t c = code;
        for (int i = 0; i < N; ++i, c /= static_cast<std::uint64_t>(N)) used[c % static_cast<std::uint64_t>(N)] = 1;
        bool prefix = true;
        for (int r = 1; r < N; ++r)
            if (used[static_cast<std::size_t>(r)] && !used[static_cast<std::size_t>(r - 1)]) prefix = false;
        count += prefix ? 1 : 0;
    }
    return count;
}

} // namespace

TEST(Cells, OrderedBellNumbers) {
    const std::array<std::uint64_t, 7> fubini{1, 1, 3, 13, 75, 541, 4683};
    for (int n = 0; n <= 6; ++n) EXPECT_EQ(ordered_bell(n), fubini[static_cast<std::size_t>(n)]);
    for (int n = 1; n <= 6; ++n) EXPECT_EQ(enumerate_cells(n).size(), fubini[static_cast<std::size_t>(n)]) << "N=" << n;
    for (int n = 1; n <= 5; ++n) EXPECT_EQ(brute_force_weak_orderings(n), fubini[static_cast<std::size_t>(n)]);
}

TEST(Cells, ThirteenCellsOfR3AreDistinct) {
    auto cells = enumerate_cells(3);
    std::set<std::string> names;
    for (const auto& c : cells) names.insert(c.describe());
    EXPECT_EQ(names.size(), 13u);
    EXPECT_TRUE(names.count("x1=x2=x3"));
    EXPECT_TRUE(names.count("x2<x1=x3"));
    int full = 0;
    for (const auto& c : cells) full += c.full() ? 1 : 0;
    EXPECT_EQ(full, 6);
    EXPECT_THROW(enumerate_cells(0), Error);
}

TEST(Cells, CellOfIsConstantOnOpenCells) {
    Stream rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x{0.3, -1.0, 0.3, 2.0};
        Cell c = cell_of(x);
        // Order-preserving perturbation: an increasing map applied coordinatewise.
        double shift = rng.normal(), scale = std::exp(rng.normal());
        std::vector<double> y;
        for (double v : x) y.push_back(scale * v + shift + 0.1 * std::tanh(v));
        EXPECT_EQ(cell_of(y), c);
    }
    EXPECT_EQ(cell_of(std::vector<double>{1.0, 1.0}).blocks(), 1);
}

TEST(Cells, VectorsAtCountOrderedBipartitions) {
    EXPECT_EQ(vectors_at(std::vector<double>{0, 0, 0}).size(), 6u);
    EXPECT_EQ(vectors_at(std::vector<double>{0, 0, 1}).size(), 2u);
    EXPECT_EQ(vectors_at(std::vector<double>{0, 1, 2}).size(), 0u);
    EXPECT_EQ(vectors_at(std::vector<double>{5, 5, 5, 5}).size(), 14u);
}

TEST(Operator, HingeAtOriginIsTwiceTheta) {
    auto theta = family(6);
    for (auto [upper, lower] : {std::pair{std::vector<int>{0}, std::vector<int>{1, 2}},
                                std::pair{std::vector<int>{0, 2}, std::vector<int>{1}},
                                std::pair{std::vector<int>{1, 3}, std::vector<int>{0, 2}},
                                std::pair{std::vector<int>{0}, std::vector<int>{1, 2, 3}}}) {
        int N = static_cast<int>(upper.size() + lower.size());
        auto f = PiecewiseLinearFn::hinge(N, upper, lower);
        std::vector<double> zero(static_cast<std::size_t>(N), 0.0);
        int k = static_cast<int>(upper.size()), l = static_cast<int>(lower.size());
        EXPECT_EQ(apply_operator(f, zero, theta), 2.0 * theta(k, l));
    }
}

TEST(Operator, AbsoluteDifferenceOnDiagonal) {
    auto theta = family(4);
    auto f = PiecewiseLinearFn::abs_diff(2, 0, 1);
    EXPECT_DOUBLE_EQ(apply_operator(f, std::vector<double>{0.7, 0.7}, theta), 4.0 * theta(1, 1));
    EXPECT_DOUBLE_EQ(apply_operator(f, std::vector<double>{0.7, 0.2}, theta), 0.0);
}

TEST(Operator, ZeroSumLinearIsDriftless) {
    auto theta = family(5);
    auto f = PiecewiseLinearFn::linear({1.0, -3.0, 2.0, 0.0});
    for (auto x : {std::vector<double>{0, 0, 0, 0}, std::vector<double>{1, 1, 0, 0}, std::vector<double>{2, 2, 2, -1}})
        EXPECT_NEAR(apply_operator(f, x, theta), 0.0, 1e-15);
}

TEST(Operator, ShiftInvariantAndLinear) {
    auto theta = family(4);
    auto f = PiecewiseLinearFn::hinge(3, {0}, {1, 2});
    auto g = PiecewiseLinearFn::abs_diff(3, 1, 2);
    for (auto x : {std::vector<double>{0, 0, 0}, std::vector<double>{1, 0, 0}, std::vector<double>{0.5, 0.5, -2}}) {
        auto y = x;
        for (auto& v : y) v += 0.375;
        EXPECT_DOUBLE_EQ(apply_operator(f, x, theta), apply_operator(f, y, theta));
        auto h = combine(2.0, f, -0.5, g);
        EXPECT_NEAR(apply_operator(h, x, theta), 2.0 * apply_operator(f, x, theta) - 0.5 * apply_operator(g, x, theta), 1e-15);
    }
    // Linear in theta: doubling a*b doubles every theta and the operator.
    auto theta2 = build_family(4, 2.0, 1.0, ThetaMethod::quadrature);
    std::vector<double> zero{0, 0, 0};
    EXPECT_NEAR(apply_operator(f, zero, theta2), 2.0 * apply_operator(f, zero, theta), 1e-14);
}

TEST(PiecewiseLinear, DiscontinuousPiecesRejected) {
    auto bad = [](const Cell& c) {
        Affine a{{0.0, 0.0}, c.rank[0] > c.rank[1] ? 1.0 : 0.0};
        return a;
    };
    EXPECT_THROW(PiecewiseLinearFn::from_cells(2, bad), Error);
    auto good = PiecewiseLinearFn::from_function(3, [](std::span<const double> x) { return std::max({x[0], x[1], x[2]}) - x[0]; });
    EXPECT_DOUBLE_EQ(good(std::vector<double>{1, 4, 2}), 3.0);
    EXPECT_THROW(PiecewiseLinearFn::hinge(2, {}, {1}), Error);
}

TEST(SnapToClusters, MergesWithinTolerance) {
    auto y = snap_to_clusters(std::vector<double>{0.0, 0.001, 0.5, 0.5015}, 0.002);
    EXPECT_DOUBLE_EQ(y[0], 0.0005);
    EXPECT_DOUBLE_EQ(y[1], 0.0005);
    EXPECT_DOUBLE_EQ(y[2], 0.50075);
    EXPECT_EQ(cell_of(y).blocks(), 2);
    auto z = snap_to_clusters(std::vector<double>{0.0, 1.0}, 0.5);
    EXPECT_EQ(cell_of(z).blocks(), 2);
}
