#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "sticky/error.hpp"
#include "sticky/quadrature.hpp"
#include "sticky/rng.hpp"

namespace sticky {

enum class PsiKind { gaussian, tabulated };

/// The spatial covariance psi of the driving flow.
///
/// psi(0) = 1, |psi(x)| < 1 away from 0, psi -> 0 at infinity, and
/// (1 - psi(x)) / x^2 -> a^2 at the origin. The gaussian kind is
/// psi(x) = exp(-a^2 x^2). The tabulated kind stores the curvature ratio
/// q(x) = (1 - psi(x)) / x^2 on a grid, pinned to q(0) = a^2, and vanishes
/// beyond the last node.
class CovarianceModel {
public:
    static CovarianceModel gaussian(double a) {
        if (!(a > 0.0) || !std::isfinite(a)) throw Error("covariance: a must be positive");
        CovarianceModel m;
        m.kind_ = PsiKind::gaussian;
        m.a_ = a;
        return m;
    }

    /// Nodes must be strictly increasing and positive.
    static CovarianceModel tabulated(double a, std::vector<double> x, std::vector<double> psi) {
        if (!(a > 0.0)) throw Error("covariance: a must be positive");
        if (x.size() != psi.size() || x.size() < 2) throw Error("covariance: tabulated psi needs >= 2 matched nodes");
        CovarianceModel m;
        m.kind_ = PsiKind::tabulated;
        m.a_ = a;
        m.nodes_.push_back(0.0);
        m.ratio_.push_back(a * a);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!(x[i] > m.nodes_.back())) throw Error("covariance: tabulated nodes must increase from 0");
            m.nodes_.push_back(x[i]);
            m.ratio_.push_back((1.0 - psi[i]) / (x[i] * x[i]));
        }
        m.validate();
        return m;
    }

    PsiKind kind() const noexcept { return kind_; }
    double a() const noexcept { return a_; }

    double operator()(double x) const {
        if (kind_ == PsiKind::gaussian) return std::exp(-a_ * a_ * x * x);
        double ax = std::abs(x);
        if (ax >= nodes_.back()) return 0.0;
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), ax);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
        double t = (ax - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
        double q = ratio_[i] + t * (ratio_[i + 1] - ratio_[i]);
        return 1.0 - q * ax * ax;
    }

    /// 1 - psi(x) without cancellation near 0.
    double one_minus_psi(double x) const {
        if (kind_ == PsiKind::gaussian) return -std::expm1(-a_ * a_ * x * x);
        double ax = std::abs(x);
        if (ax >= nodes_.back()) return 1.0;
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), ax);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
        double t = (ax - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
        return (ratio_[i] + t * (ratio_[i + 1] - ratio_[i])) * ax * ax;
    }

    /// Distance beyond which |psi| is negligible (below ~1e-21).
    double support() const noexcept {
        return kind_ == PsiKind::gaussian ? 7.0 / a_ : nodes_.back();
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        if (kind_ == PsiKind::gaussian)
            os << "gaussian exp(-a^2 x^2), a=" << a_;
        else
            os << "tabulated (" << nodes_.size() - 1 << " nodes), a=" << a_;
        return os.str();
    }

private:
    CovarianceModel() = default;

    void validate() const {
        for (std::size_t i = 1; i < nodes_.size(); ++i) {
            double p = 1.0 - ratio_[i] * nodes_[i] * nodes_[i];
            if (!(std::abs(p) < 1.0))
                throw Error("covariance: tabulated psi violates |psi(x)| < 1 at x=" + std::to_string(nodes_[i]));
        }
        double tail = 1.0 - ratio_.back() * nodes_.back() * nodes_.back();
        if (std::abs(tail) > 1e-3) throw Error("covariance: tabulated psi does not decay to 0 at the last node");
        // Positive-definiteness on a uniform sample of the support. The spacing is
        // kept coarse: at fine spacings smooth kernels are numerically singular.
        const int m = 32;
        double step = nodes_.back() / 8.0;
        std::vector<double> c(m * m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) c[i * m + j] = (*this)(step * (i - j));
        // Cholesky with a small tolerance; failure means psi is not positive definite.
        for (int j = 0; j < m; ++j) {
            double d = c[j * m + j];
            for (int k = 0; k < j; ++k) d -= c[j * m + k] * c[j * m + k];
            if (d < -1e-10 * m) throw Error("covariance: tabulated psi is not positive definite");
            d = std::sqrt(std::max(d, 1e-14));
            c[j * m + j] = d;
            for (int i = j + 1; i < m; ++i) {
                double s = c[i * m + j];
                for (int k = 0; k < j; ++k) s -= c[i * m + k] * c[j * m + k];
                c[i * m + j] = s / d;
            }
        }
    }

    PsiKind kind_ = PsiKind::gaussian;
    double a_ = 1.0;
    std::vector<double> nodes_;
    std::vector<double> ratio_;
};

inline double psi(const CovarianceModel& model, double x) { return model(x); }

/// psi(n .) with independent diffusivity b^2 / n^2.
struct ScaledModel {
    CovarianceModel base;
    int n = 1;
    double b = 1.0;

    ScaledModel(CovarianceModel base_, int n_, double b_) : base(std::move(base_)), n(n_), b(b_) {
        if (n < 1) throw Error("scaled model: n must be >= 1");
        if (!(b > 0.0)) throw Error("scaled model: b must be positive");
    }

    double beta() const noexcept { return b * b / (static_cast<double>(n) * n); }
    double psi(double z) const { return base(static_cast<double>(n) * z); }
    double one_minus_psi(double z) const { return base.one_minus_psi(static_cast<double>(n) * z); }
    /// Width of the region where the speed density is of order n^2 / b^2.
    double spike_width() const noexcept { return b / (base.a() * static_cast<double>(n) * n); }
    /// Distance beyond which psi(n z) is negligible.
    double core_width() const noexcept { return base.support() / n; }
};

/// Density of the speed measure of the two-point difference in natural scale.
inline double speed_density(const ScaledModel& s, double z) {
    return 1.0 / (s.beta() + s.one_minus_psi(z));
}

/// Mass of the speed measure on [-h, h] by adaptive quadrature. Converges to
/// 2h + pi / (a b) as n grows.
inline double speed_measure_mass(const ScaledModel& s, double half_width, double rel_tol = 1e-11) {
    if (!(half_width > 0.0)) throw Error("speed_measure_mass: half_width must be positive");
    std::vector<double> cuts{0.0};
    for (double c = s.spike_width(); c < half_width; c *= 4.0) cuts.push_back(c);
    if (s.core_width() < half_width) cuts.push_back(s.core_width());
    cuts.push_back(half_width);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // A crude upper bound sets the absolute tolerance: density <= n^2 / b^2.
    double scale = 2.0 * half_width + std::numbers::pi / (s.base.a() * s.b);
    auto r = quad::adaptive([&](double z) { return speed_density(s, z); }, cuts, 0.5 * rel_tol * scale);
    return 2.0 * r.value;
}

/// Random Fourier features of the field W(t, .) over one unit of time:
/// W(x) = J^{-1/2} sum_j (A_j cos(k_j x) + B_j sin(k_j x)) with k_j drawn
/// from the spectral measure of psi(n .) and A_j, B_j standard normal.
struct FourierFeature {
    double k = 0.0;
    double cos_amp = 0.0;
    double sin_amp = 0.0;
};

struct FourierField {
    std::vector<FourierFeature> features;

    std::size_t count() const noexcept { return features.size(); }

    /// Field increment per unit time at x (scale by sqrt(dt) for a step).
    double operator()(double x) const {
        double s = 0.0;
        for (const auto& f : features) s += f.cos_amp * std::cos(f.k * x) + f.sin_amp * std::sin(f.k * x);
        return s / std::sqrt(static_cast<double>(features.size()));
    }
};

/// For psi(x) = exp(-a^2 x^2) the spectral measure of psi(n .) is N(0, 2 a^2 n^2).
inline FourierField sample_field(const ScaledModel& s, std::size_t J, Stream& rng) {
    if (J < 1) throw Error("sample_field: J must be >= 1");
    if (s.base.kind() != PsiKind::gaussian)
        throw Error("sample_field: spectral sampling is only available for the gaussian kind");
    double sigma_k = std::numbers::sqrt2 * s.base.a() * s.n;
    FourierField f;
    f.features.resize(J);
    for (auto& feat : f.features) {
        feat.k = sigma_k * rng.normal();
        feat.cos_amp = rng.normal();
        feat.sin_amp = rng.normal();
    }
    return f;
}

/// Exact spectral synthesis of the field increment on a periodic grid of M
/// points over [0, L). The covariance is the periodised psi(n .), diagonalised
/// by the DFT. One complex transform yields two independent real draws.
class PeriodicFieldSampler {
public:
    PeriodicFieldSampler(const ScaledModel& s, double length, std::size_t points)
        : length_(length), points_(points) {
        if (points < 4 || !(length > 0.0)) throw Error("periodic field: need length > 0 and >= 4 points");
        double dx = length / static_cast<double>(points);
        std::vector<double> c(points, 0.0);
        int images = static_cast<int>(std::ceil(s.core_width() / length)) + 1;
        for (std::size_t j = 0; j < points; ++j)
            for (int m = -images; m <= images; ++m) c[j] += s.psi(static_cast<double>(j) * dx + m * length);
        in_ = fftw_alloc_complex(points);
        out_ = fftw_alloc_complex(points);
        {
            std::lock_guard lock(plan_mutex());
            plan_ = fftw_plan_dft_1d(static_cast<int>(points), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
        }
        for (std::size_t j = 0; j < points; ++j) {
            in_[j][0] = c[j];
            in_[j][1] = 0.0;
        }
        fftw_execute(plan_);
        amplitude_.resize(points);
        min_eigenvalue_ = INFINITY;
        for (std::size_t m = 0; m < points; ++m) {
            double lambda = out_[m][0];
            min_eigenvalue_ = std::min(min_eigenvalue_, lambda);
            amplitude_[m] = std::sqrt(std::max(lambda, 0.0) / static_cast<double>(points));
        }
    }

    PeriodicFieldSampler(const PeriodicFieldSampler&) = delete;
    PeriodicFieldSampler& operator=(const PeriodicFieldSampler&) = delete;

    ~PeriodicFieldSampler() {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }

    std::size_t points() const noexcept { return points_; }
    double length() const noexcept { return length_; }
    double spacing() const noexcept { return length_ / static_cast<double>(points_); }
    /// Most negative eigenvalue of the circulant covariance before clipping.
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

    /// Fills `out` with a unit-time field increment on the grid x_j = j L / M.
    void next(Stream& rng, std::span<double> out) {
        if (!have_spare_) {
            for (std::size_t m = 0; m < points_; ++m) {
                in_[m][0] = amplitude_[m] * rng.normal();
                in_[m][1] = amplitude_[m] * rng.normal();
            }
            fftw_execute(plan_);
            have_spare_ = true;
            for (std::size_t j = 0; j < points_; ++j) out[j] = out_[j][0];
        } else {
            have_spare_ = false;
            for (std::size_t j = 0; j < points_; ++j) out[j] = out_[j][1];
        }
    }

private:
    static std::mutex& plan_mutex() {
        static std::mutex m;
        return m;
    }

    double length_;
    std::size_t points_;
    std::vector<double> amplitude_;
    double min_eigenvalue_ = 0.0;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
    bool have_spare_ = false;
};

} // namespace sticky
