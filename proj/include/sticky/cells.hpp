#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sticky/error.hpp"
#include "sticky/theta.hpp"

namespace sticky {

inline constexpr int max_cell_dimension = 8;

/// A cell of R^N, given by a weak ordering: rank[i] in {0..blocks-1} and
/// x_i <= x_j iff rank[i] <= rank[j].
struct Cell {
    std::vector<int> rank;

    int size() const noexcept { return static_cast<int>(rank.size()); }
    int blocks() const { return rank.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1; }
    bool full() const { return blocks() == size(); }

    /// Members of each block, lowest block first, indices ascending.
    std::vector<std::vector<int>> block_members() const {
        std::vector<std::vector<int>> out(static_cast<std::size_t>(blocks()));
        for (int i = 0; i < size(); ++i) out[static_cast<std::size_t>(rank[i])].push_back(i);
        return out;
    }

    /// Human-readable form such as "x1<x2=x3".
    std::string describe() const {
        std::string s;
        auto groups = block_members();
        for (std::size_t b = 0; b < groups.size(); ++b) {
            if (b) s += "<";
            for (std::size_t k = 0; k < groups[b].size(); ++k) {
                if (k) s += "=";
                s += "x" + std::to_string(groups[b][k] + 1);
            }
        }
        return s;
    }

    /// Breaks ties inside each block by index, giving a full-dimensional cell
    /// whose closure contains this one.
    Cell refine() const {
        Cell c;
        c.rank.assign(rank.size(), 0);
        int next = 0;
        for (const auto& members : block_members())
            for (int i : members) c.rank[static_cast<std::size_t>(i)] = next++;
        return c;
    }

    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Ties are exact equality of coordinates.
inline Cell cell_of(std::span<const double> x) {
    std::vector<double> values(x.begin(), x.end());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    Cell c;
    c.rank.reserve(x.size());
    for (double v : x)
        c.rank.push_back(static_cast<int>(std::lower_bound(values.begin(), values.end(), v) - values.begin()));
    return c;
}

/// Ordered Bell (Fubini) number, by the recurrence a(n) = sum_k C(n,k) a(n-k).
inline std::uint64_t ordered_bell(int n) {
    std::vector<std::uint64_t> a(static_cast<std::size_t>(n) + 1, 0);
    a[0] = 1;
    for (int m = 1; m <= n; ++m) {
        std::uint64_t binom = 1;
        for (int k = 1; k <= m; ++k) {
            binom = binom * static_cast<std::uint64_t>(m - k + 1) / static_cast<std::uint64_t>(k);
            a[static_cast<std::size_t>(m)] += binom * a[static_cast<std::size_t>(m - k)];
        }
    }
    return a[static_cast<std::size_t>(n)];
}

/// All weak orderings of {1..N}: the lowest block is chosen first among the
/// nonempty subsets of the remaining indices.
inline std::vector<Cell> enumerate_cells(int N) {
    if (N < 1 || N > max_cell_dimension)
        throw Error("enumerate_cells: N must be in 1.." + std::to_string(max_cell_dimension));
    std::vector<Cell> out;
    Cell current;
    current.rank.assign(static_cast<std::size_t>(N), -1);
    std::function<void(unsigned, int)> recurse = [&](unsigned remaining, int level) {
        if (remaining == 0) {
            out.push_back(current);
            return;
        }
        for (unsigned sub = remaining; sub; sub = (sub - 1) & remaining) {
            for (int i = 0; i < N; ++i)
                if (sub >> i & 1u) current.rank[static_cast<std::size_t>(i)] = level;
            recurse(remaining & ~sub, level + 1);
        }
        for (int i = 0; i < N; ++i)
            if (remaining >> i & 1u) current.rank[static_cast<std::size_t>(i)] = -1;
    };
    recurse((1u << N) - 1u, 0);
    std::sort(out.begin(), out.end());
    return out;
}

/// v_{I,J}: +1 on I, -1 on J, 0 elsewhere. Moving along v lifts I above J.
struct DirectionVector {
    std::vector<int> I;
    std::vector<int> J;
    std::vector<int> v;
};

inline DirectionVector make_direction(int N, std::vector<int> I, std::vector<int> J) {
    if (I.empty() || J.empty()) throw Error("direction vector: I and J must be nonempty");
    DirectionVector d{std::move(I), std::move(J), std::vector<int>(static_cast<std::size_t>(N), 0)};
    for (int i : d.I) d.v.at(static_cast<std::size_t>(i)) = 1;
    for (int j : d.J) {
        if (d.v.at(static_cast<std::size_t>(j)) != 0) throw Error("direction vector: I and J must be disjoint");
        d.v[static_cast<std::size_t>(j)] = -1;
    }
    return d;
}

/// Every ordered bipartition (I, J) of every block of the partition pi(x).
inline std::vector<DirectionVector> vectors_at(std::span<const double> x) {
    int N = static_cast<int>(x.size());
    std::vector<DirectionVector> out;
    for (const auto& block : cell_of(x).block_members()) {
        auto m = static_cast<unsigned>(block.size());
        if (m < 2) continue;
        for (unsigned mask = 1; mask + 1 < (1u << m); ++mask) {
            std::vector<int> I, J;
            for (unsigned k = 0; k < m; ++k) (mask >> k & 1u ? I : J).push_back(block[k]);
            out.push_back(make_direction(N, std::move(I), std::move(J)));
        }
    }
    return out;
}

/// Affine piece f(x) = gradient . x + offset.
struct Affine {
    std::vector<double> gradient;
    double offset = 0.0;

    double operator()(std::span<const double> x) const {
        double s = offset;
        for (std::size_t i = 0; i < x.size(); ++i) s += gradient[i] * x[i];
        return s;
    }
};

/// A continuous function on R^N that is affine on every cell. Affine data is
/// held for the N! full-dimensional cells; a lower-dimensional cell uses the
/// piece of any full cell whose closure contains it, which is well defined by
/// continuity.
class PiecewiseLinearFn {
public:
    using CellFunction = std::function<Affine(const Cell&)>;

    /// Builds from the affine piece on each full-dimensional cell and validates continuity.
    static PiecewiseLinearFn from_cells(int N, const CellFunction& piece, double tol = 1e-12) {
        if (N < 1 || N > max_cell_dimension) throw Error("piecewise linear fn: N out of range");
        PiecewiseLinearFn f;
        f.N_ = N;
        std::vector<int> perm(static_cast<std::size_t>(N));
        std::iota(perm.begin(), perm.end(), 0);
        f.pieces_.resize(factorial(N));
        do {
            Cell c{perm};
            Affine a = piece(c);
            if (static_cast<int>(a.gradient.size()) != N) throw Error("piecewise linear fn: gradient size mismatch");
            f.pieces_[f.index_of(c)] = std::move(a);
        } while (std::next_permutation(perm.begin(), perm.end()));
        f.validate(tol);
        return f;
    }

    /// Builds from point evaluations of a function assumed to be in L_N.
    static PiecewiseLinearFn from_function(int N, const std::function<double(std::span<const double>)>& fn,
                                           double tol = 1e-12) {
        return from_cells(
            N,
            [&](const Cell& c) {
                std::vector<double> base(static_cast<std::size_t>(N));
                for (int i = 0; i < N; ++i) base[static_cast<std::size_t>(i)] = 2.0 * c.rank[static_cast<std::size_t>(i)];
                Affine a;
                double f0 = fn(base);
                a.gradient.resize(static_cast<std::size_t>(N));
                for (int i = 0; i < N; ++i) {
                    auto p = base;
                    p[static_cast<std::size_t>(i)] += 1.0;
                    a.gradient[static_cast<std::size_t>(i)] = fn(p) - f0;
                }
                a.offset = f0 - Affine{a.gradient, 0.0}(base);
                return a;
            },
            tol);
    }

    /// (min_{i in upper} x_i - max_{j in lower} x_j)^+.
    static PiecewiseLinearFn hinge(int N, const std::vector<int>& upper, const std::vector<int>& lower) {
        if (upper.empty() || lower.empty()) throw Error("hinge: both index sets must be nonempty");
        auto fn = from_cells(N, [&](const Cell& c) {
            auto r = [&](int i) { return c.rank.at(static_cast<std::size_t>(i)); };
            int lo = *std::min_element(upper.begin(), upper.end(), [&](int p, int q) { return r(p) < r(q); });
            int hi = *std::max_element(lower.begin(), lower.end(), [&](int p, int q) { return r(p) < r(q); });
            Affine a{std::vector<double>(static_cast<std::size_t>(N), 0.0), 0.0};
            if (r(lo) > r(hi)) {
                a.gradient[static_cast<std::size_t>(lo)] = 1.0;
                a.gradient[static_cast<std::size_t>(hi)] = -1.0;
            }
            return a;
        });
        return fn;
    }

    /// |x_i - x_j|.
    static PiecewiseLinearFn abs_diff(int N, int i, int j) {
        if (i == j) throw Error("abs_diff: indices must differ");
        return from_cells(N, [&](const Cell& c) {
            Affine a{std::vector<double>(static_cast<std::size_t>(N), 0.0), 0.0};
            double s = c.rank.at(static_cast<std::size_t>(i)) > c.rank.at(static_cast<std::size_t>(j)) ? 1.0 : -1.0;
            a.gradient[static_cast<std::size_t>(i)] = s;
            a.gradient[static_cast<std::size_t>(j)] = -s;
            return a;
        });
    }

    static PiecewiseLinearFn linear(std::vector<double> coefficients, double offset = 0.0) {
        int N = static_cast<int>(coefficients.size());
        return from_cells(N, [&](const Cell&) { return Affine{coefficients, offset}; });
    }

    int dimension() const noexcept { return N_; }

    /// Affine piece valid on the closure of `c` (any cell, not only full ones).
    const Affine& piece(const Cell& c) const { return pieces_[index_of(c.refine())]; }

    double operator()(std::span<const double> x) const {
        check_dimension(x.size());
        return piece(cell_of(x))(x);
    }

    /// Membership in L_N^0: gradients sum to zero in every cell and f vanishes on the diagonal.
    bool shift_invariant(double tol = 1e-12) const {
        for (const auto& a : pieces_) {
            double s = std::accumulate(a.gradient.begin(), a.gradient.end(), 0.0);
            if (std::abs(s) > tol || std::abs(a.offset) > tol) return false;
        }
        return true;
    }

    /// One-sided directional derivative at x along v: the affine piece of the
    /// cell entered by x + eps v, in which the block holding I and J splits
    /// with J just below I.
    double directional_gradient(std::span<const double> x, const DirectionVector& d) const {
        check_dimension(x.size());
        Cell c = cell_of(x);
        int block = c.rank.at(static_cast<std::size_t>(d.I.front()));
        for (int i : d.I)
            if (c.rank.at(static_cast<std::size_t>(i)) != block) throw Error("direction does not fit one block");
        for (int j : d.J)
            if (c.rank.at(static_cast<std::size_t>(j)) != block) throw Error("direction does not fit one block");
        // Ranks are doubled so that the split block fits between neighbours.
        Cell dest{c.rank};
        for (int i = 0; i < N_; ++i) {
            auto& r = dest.rank[static_cast<std::size_t>(i)];
            r = 2 * r + (d.v[static_cast<std::size_t>(i)] > 0 ? 1 : 0);
        }
        dest = cell_of(std::vector<double>(dest.rank.begin(), dest.rank.end()));
        const Affine& a = piece(dest);
        double g = 0.0;
        for (int i = 0; i < N_; ++i) g += a.gradient[static_cast<std::size_t>(i)] * d.v[static_cast<std::size_t>(i)];
        return g;
    }

    /// Pointwise linear combination (affine pieces add cell by cell).
    friend PiecewiseLinearFn combine(double alpha, const PiecewiseLinearFn& f, double beta, const PiecewiseLinearFn& g) {
        if (f.N_ != g.N_) throw Error("combine: dimension mismatch");
        PiecewiseLinearFn h = f;
        for (std::size_t k = 0; k < h.pieces_.size(); ++k) {
            for (std::size_t i = 0; i < h.pieces_[k].gradient.size(); ++i)
                h.pieces_[k].gradient[i] = alpha * f.pieces_[k].gradient[i] + beta * g.pieces_[k].gradient[i];
            h.pieces_[k].offset = alpha * f.pieces_[k].offset + beta * g.pieces_[k].offset;
        }
        return h;
    }

private:
    static std::size_t factorial(int n) {
        std::size_t f = 1;
        for (int k = 2; k <= n; ++k) f *= static_cast<std::size_t>(k);
        return f;
    }

    void check_dimension(std::size_t n) const {
        if (static_cast<int>(n) != N_) throw Error("piecewise linear fn: point has wrong dimension");
    }

    /// Lehmer code of the permutation given by a full cell's ranks.
    std::size_t index_of(const Cell& full) const {
        std::size_t idx = 0;
        for (int i = 0; i < N_; ++i) {
            std::size_t smaller = 0;
            for (int j = i + 1; j < N_; ++j)
                if (full.rank[static_cast<std::size_t>(j)] < full.rank[static_cast<std::size_t>(i)]) ++smaller;
            idx = idx * static_cast<std::size_t>(N_ - i) + smaller;
        }
        return idx;
    }

    /// Neighbouring full cells (adjacent ranks swapped) must agree on their
    /// shared face. The face is spanned by its base point (ranks doubled, the two
    /// merged blocks tied) and one step up for each of its N-1 blocks.
    void validate(double tol) const {
        std::vector<int> perm(static_cast<std::size_t>(N_));
        std::iota(perm.begin(), perm.end(), 0);
        do {
            Cell c{perm};
            for (int r = 0; r + 1 < N_; ++r) {
                Cell face{c.rank};
                for (auto& v : face.rank)
                    if (v > r) --v;
                Cell other{c.rank};
                for (auto& v : other.rank) v = v == r ? r + 1 : (v == r + 1 ? r : v);
                const Affine& p = pieces_[index_of(c)];
                const Affine& q = pieces_[index_of(other)];
                int m = face.blocks();
                for (int extra = -1; extra < m; ++extra) {
                    std::vector<double> x(static_cast<std::size_t>(N_));
                    for (int i = 0; i < N_; ++i) {
                        int b = face.rank[static_cast<std::size_t>(i)];
                        x[static_cast<std::size_t>(i)] = 2.0 * b + (b == extra ? 1.0 : 0.0);
                    }
                    double scale = 1.0 + std::abs(p(x));
                    if (std::abs(p(x) - q(x)) > tol * scale)
                        throw InvariantError("piecewise linear fn is discontinuous between " + c.describe() + " and " +
                                             other.describe());
                }
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    }

    int N_ = 0;
    std::vector<Affine> pieces_;
};

/// sum over v in V(x) of theta(|I|:|J|) times the one-sided gradient along v.
inline double apply_operator(const PiecewiseLinearFn& f, std::span<const double> x, const ThetaFamily& theta) {
    double total = 0.0;
    for (const auto& d : vectors_at(x)) {
        int k = static_cast<int>(d.I.size()), l = static_cast<int>(d.J.size());
        total += theta(k, l) * f.directional_gradient(x, d);
    }
    return total;
}

/// Replaces coordinates whose single-linkage gaps are <= delta by their cluster
/// mean, so prelimit states acquire the exact ties the combinatorics needs.
inline std::vector<double> snap_to_clusters(std::span<const double> x, double delta) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return x[p] < x[q]; });
    std::vector<double> out(x.begin(), x.end());
    std::size_t start = 0;
    for (std::size_t k = 1; k <= order.size(); ++k) {
        if (k == order.size() || x[order[k]] - x[order[k - 1]] > delta) {
            double mean = 0.0;
            for (std::size_t t = start; t < k; ++t) mean += x[order[t]];
            mean /= static_cast<double>(k - start);
            if (k - start > 1)
                for (std::size_t t = start; t < k; ++t) out[order[t]] = mean;
            start = k;
        }
    }
    return out;
}

} // namespace sticky
