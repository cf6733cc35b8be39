#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "sticky/error.hpp"
#include "sticky/normal.hpp"
#include "sticky/parallel.hpp"
#include "sticky/quadrature.hpp"
#include "sticky/rng.hpp"
#include "sticky/stats.hpp"

namespace sticky {

enum class ThetaMethod { quadrature, montecarlo, nu };

inline std::string to_string(ThetaMethod m) {
    switch (m) {
    case ThetaMethod::quadrature: return "quad";
    case ThetaMethod::montecarlo: return "mc";
    case ThetaMethod::nu: return "nu";
    }
    return "?";
}

inline ThetaMethod parse_theta_method(const std::string& s) {
    if (s == "quad" || s == "quadrature") return ThetaMethod::quadrature;
    if (s == "mc" || s == "montecarlo") return ThetaMethod::montecarlo;
    if (s == "nu") return ThetaMethod::nu;
    throw Error("unknown theta method '" + s + "' (expected quad, mc or nu)");
}

/// Prefactor ab / (2 sqrt(pi)) shared by every representation of theta(k:l).
inline double theta_prefactor(double a, double b) {
    return a * b / (2.0 * std::sqrt(std::numbers::pi));
}

/// The integrand Phi(z)^k (1 - Phi(z))^l; z is the splitting point and Phi(z)
/// the probability that one Gaussian particle of the cluster lies below it.
inline double split_integrand(int k, int l, double z) {
    return std::pow(normal::cdf(z), k) * std::pow(normal::sf(z), l);
}

/// Truncation of the splitting-point integral; the discarded tails are below
/// 2 phi(12) ~ 4e-32 for every k, l >= 1.
inline constexpr double theta_cutoff = 12.0;

inline double theta_tail_bound(double a, double b) {
    return theta_prefactor(a, b) * 2.0 * normal::pdf(theta_cutoff);
}

struct ThetaValue {
    double value = 0.0;
    double error_bound = 0.0;
};

inline void check_theta_args(int k, int l, double a, double b) {
    if (k < 1 || l < 1) throw Error("theta: k and l must be >= 1");
    if (!(a > 0.0) || !(b > 0.0)) throw Error("theta: a and b must be positive");
}

/// theta(k:l) = ab/(2 sqrt(pi)) * int Phi(z)^k (1 - Phi(z))^l dz, by adaptive
/// quadrature on [-12, 12] with a certified tail bound.
inline ThetaValue theta_quadrature(int k, int l, double a, double b, double tol = 1e-12) {
    check_theta_args(k, l, a, b);
    if (!(tol > 0.0)) throw Error("theta_quadrature: tol must be positive");
    double pre = theta_prefactor(a, b);
    double tail = theta_tail_bound(a, b);
    if (tail >= tol) throw QuadratureError("theta_quadrature: tolerance below truncation error", tail);
    const double cuts[] = {-theta_cutoff, -4.0, 0.0, 4.0, theta_cutoff};
    auto r = quad::adaptive([&](double z) { return split_integrand(k, l, z); }, cuts, (tol - tail) / pre);
    return {pre * r.value, pre * r.error + tail};
}

/// Direct Monte-Carlo form: for x standard normal in R^{k+l}, the length of the
/// set of z with x_1..x_k < z < x_{k+1}..x_{k+l} is (min upper - max lower)^+.
/// Samples are drawn in fixed blocks with derived sub-streams, so the estimate
/// does not depend on the number of workers.
inline Estimate theta_montecarlo(int k, int l, double a, double b, std::uint64_t samples, std::uint64_t seed,
                                 unsigned workers = 1) {
    check_theta_args(k, l, a, b);
    if (samples < 1) throw Error("theta_montecarlo: samples must be >= 1");
    constexpr std::uint64_t block = 1 << 16;
    std::uint64_t blocks = (samples + block - 1) / block;
    struct Partial {
        double sum = 0.0;
        double sum_sq = 0.0;
        std::uint64_t n = 0;
    };
    auto parts = parallel_map(blocks, workers, [&](std::size_t bi) {
        Stream rng(seed, "theta-mc", bi);
        std::uint64_t n = std::min<std::uint64_t>(block, samples - bi * block);
        Partial p;
        p.n = n;
        for (std::uint64_t s = 0; s < n; ++s) {
            double lower = -std::numeric_limits<double>::infinity();
            double upper = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i) lower = std::max(lower, rng.normal());
            for (int i = 0; i < l; ++i) upper = std::min(upper, rng.normal());
            double gap = upper > lower ? upper - lower : 0.0;
            p.sum += gap;
            p.sum_sq += gap * gap;
        }
        return p;
    });
    double sum = 0.0, sum_sq = 0.0;
    double n = 0.0;
    for (const auto& p : parts) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        n += static_cast<double>(p.n);
    }
    double mean = sum / n;
    double var = n > 1 ? (sum_sq - n * mean * mean) / (n - 1.0) : 0.0;
    double pre = theta_prefactor(a, b);
    return {pre * mean, pre * std::sqrt(std::max(var, 0.0) / n)};
}

/// Splitting measure nu(dq) = ab/(2 sqrt(pi)) q (1-q) / phi(Phi^{-1}(q)) dq on (0, 1).
struct SplittingMeasure {
    double a = 1.0;
    double b = 1.0;

    double density(double q) const { return density(q, 1.0 - q); }

    /// Density given q and its complement, so that q near 1 keeps full precision.
    double density(double q, double one_minus_q) const {
        double z = q <= 0.5 ? normal::quantile(q) : normal::quantile_upper(one_minus_q);
        return theta_prefactor(a, b) * q * one_minus_q / normal::pdf(z);
    }

    /// int q^{k-1} (1-q)^{l-1} nu(dq), integrated in z after q = Phi(z), which
    /// removes the endpoint singularities of the density.
    ThetaValue moment(int k, int l, double tol = 1e-12) const {
        check_theta_args(k, l, a, b);
        double tail = theta_tail_bound(a, b);
        if (tail >= tol) throw QuadratureError("splitting measure: tolerance below truncation error", tail);
        auto integrand = [&](double z) {
            double q = normal::cdf(z);
            double qc = normal::sf(z);
            return std::pow(q, k - 1) * std::pow(qc, l - 1) * density(q, qc) * normal::pdf(z);
        };
        const double cuts[] = {-theta_cutoff, -4.0, 0.0, 4.0, theta_cutoff};
        auto r = quad::adaptive(integrand, cuts, tol - tail);
        return {r.value, r.error + tail};
    }
};

inline ThetaValue theta_from_nu(int k, int l, double a, double b, double tol = 1e-12) {
    check_theta_args(k, l, a, b);
    if (!(tol > 0.0)) throw Error("theta_from_nu: tol must be positive");
    return SplittingMeasure{a, b}.moment(k, l, tol);
}

/// theta(k:l) for all k, l >= 1 with k + l <= nmax.
class ThetaFamily {
public:
    ThetaFamily(int nmax, double a, double b, ThetaMethod method) : nmax_(nmax), a_(a), b_(b), method_(method) {
        if (nmax < 2) throw Error("theta family: nmax must be >= 2");
    }

    int nmax() const noexcept { return nmax_; }
    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    ThetaMethod method() const noexcept { return method_; }

    bool has(int k, int l) const { return values_.count({k, l}) != 0; }

    double operator()(int k, int l) const {
        auto it = values_.find({k, l});
        if (it == values_.end())
            throw Error("theta(" + std::to_string(k) + ":" + std::to_string(l) + ") is not in the family");
        return it->second.value;
    }

    double error_bound(int k, int l) const { return values_.at({k, l}).error_bound; }

    void set(int k, int l, ThetaValue v) {
        if (k < 1 || l < 1 || k + l > nmax_) throw Error("theta family: index out of range");
        values_[{k, l}] = v;
    }

    const std::map<std::pair<int, int>, ThetaValue>& entries() const noexcept { return values_; }

    /// Largest |theta(k:l) - theta(k+1:l) - theta(k:l+1)| over the family.
    double consistency_residual() const {
        double worst = 0.0;
        for (const auto& [kl, v] : values_) {
            auto [k, l] = kl;
            if (k + l + 1 > nmax_) continue;
            worst = std::max(worst, std::abs(v.value - (*this)(k + 1, l) - (*this)(k, l + 1)));
        }
        return worst;
    }

    /// sum_{k=1}^{N-1} C(N, k) theta(k : N-k), the total splitting rate of an N-cluster.
    double total_split_rate(int N) const {
        double total = 0.0;
        double binom = 1.0;
        for (int k = 1; k < N; ++k) {
            binom = binom * (N - k + 1) / k;
            total += binom * (*this)(k, N - k);
        }
        return total;
    }

    /// Throws InvariantError naming the first violated entry.
    void check_invariants(double tol) const {
        for (const auto& [kl, v] : values_) {
            auto [k, l] = kl;
            std::string name = "theta(" + std::to_string(k) + ":" + std::to_string(l) + ")";
            if (v.value < -tol) throw InvariantError(name + " is negative");
            double mirror = (*this)(l, k);
            double sym_tol = tol + v.error_bound + error_bound(l, k);
            if (std::abs(v.value - mirror) > sym_tol) throw InvariantError(name + " breaks symmetry");
            if (k + l + 1 <= nmax_) {
                double rhs = (*this)(k + 1, l) + (*this)(k, l + 1);
                double cons_tol = tol + v.error_bound + error_bound(k + 1, l) + error_bound(k, l + 1);
                if (std::abs(v.value - rhs) > cons_tol) throw InvariantError(name + " breaks consistency");
            }
        }
    }

private:
    int nmax_;
    double a_;
    double b_;
    ThetaMethod method_;
    std::map<std::pair<int, int>, ThetaValue> values_;
};

struct FamilyOptions {
    double tol = 1e-12;                 // quadrature / nu
    std::uint64_t samples = 1'000'000;  // montecarlo
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

/// Quadrature families share one symmetric grid, so the consistency identity
/// holds pointwise and theta(k:l) == theta(l:k) exactly.
inline ThetaFamily build_family(int nmax, double a, double b, ThetaMethod method, const FamilyOptions& opt = {}) {
    ThetaFamily fam(nmax, a, b, method);
    if (!(a > 0.0) || !(b > 0.0)) throw Error("theta family: a and b must be positive");
    switch (method) {
    case ThetaMethod::quadrature: {
        quad::SymmetricRule fine(theta_cutoff, 48), coarse(theta_cutoff, 24);
        double pre = theta_prefactor(a, b);
        double tail = theta_tail_bound(a, b);
        auto integrate = [&](const quad::SymmetricRule& rule, int k, int l) {
            return rule.integrate([&](double z) { return split_integrand(k, l, z); });
        };
        for (int k = 1; k < nmax; ++k)
            for (int l = 1; k + l <= nmax; ++l) {
                double v = pre * integrate(fine, k, l);
                double c = pre * integrate(coarse, k, l);
                fam.set(k, l, {v, std::abs(v - c) + tail});
            }
        break;
    }
    case ThetaMethod::montecarlo:
        for (int k = 1; k < nmax; ++k)
            for (int l = 1; k + l <= nmax; ++l) {
                auto e = theta_montecarlo(k, l, a, b, opt.samples,
                                          derive_seed(opt.seed, "family", static_cast<std::uint64_t>(k * 64 + l)),
                                          opt.workers);
                // Entries are independent estimates; a 6-sigma band guards the checks.
                fam.set(k, l, {e.value, 6.0 * e.stderr});
            }
        break;
    case ThetaMethod::nu:
        for (int k = 1; k < nmax; ++k)
            for (int l = 1; k + l <= nmax; ++l) fam.set(k, l, theta_from_nu(k, l, a, b, opt.tol));
        break;
    }
    fam.check_invariants(1e-10 * std::max(1.0, a * b));
    return fam;
}

} // namespace sticky
