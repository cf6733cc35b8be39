#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace sticky {

/// Sample mean with its standard error.
struct Estimate {
    double value = 0.0;
    double stderr = 0.0;

    double z_score(double expected) const {
        if (stderr <= 0.0) return value == expected ? 0.0 : INFINITY;
        return (value - expected) / stderr;
    }
};

/// Welford accumulator. Merge order is fixed by the callers, which keeps
/// reductions reproducible.
class RunningStats {
public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }
    double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double stddev() const noexcept { return std::sqrt(variance()); }
    // For the sample mean the delete-one jackknife standard error reduces to s/sqrt(n).
    double stderr() const noexcept {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    Estimate estimate() const noexcept { return {mean(), stderr()}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline Estimate mean_estimate(std::span<const double> xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return s.estimate();
}

/// Pairwise summation; error grows as O(log n) rather than O(n).
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 16) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("median of empty sample");
    std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("correlation: size mismatch");
    double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Kuiper's test of uniformity for samples in [0, 1).
struct KuiperResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

inline double kuiper_q(double lambda) {
    if (lambda < 0.4) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        double j2l2 = static_cast<double>(j * j) * lambda * lambda;
        double term = (4.0 * j2l2 - 1.0) * std::exp(-2.0 * j2l2);
        sum += term;
        if (std::abs(term) < 1e-16 * std::abs(sum)) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KuiperResult kuiper_uniform(std::vector<double> u) {
    if (u.empty()) throw std::invalid_argument("kuiper test needs samples");
    std::sort(u.begin(), u.end());
    double n = static_cast<double>(u.size());
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        dplus = std::max(dplus, hi - u[i]);
        dminus = std::max(dminus, u[i] - lo);
    }
    double v = dplus + dminus;
    double sn = std::sqrt(n);
    return {v, kuiper_q((sn + 0.155 + 0.24 / sn) * v)};
}

/// Weighted least squares fit y = intercept + slope * x.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_stderr = 0.0;
};

inline LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> weights) {
    if (x.size() != y.size() || x.size() != weights.size() || x.size() < 2)
        throw std::invalid_argument("weighted_line_fit: need at least two matched points");
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double w = weights[i];
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
        sxx += w * x[i] * x[i];
        sxy += w * x[i] * y[i];
    }
    double det = sw * sxx - sx * sx;
    if (det <= 0) throw std::invalid_argument("weighted_line_fit: degenerate abscissae");
    LineFit fit;
    fit.slope = (sw * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / sw;
    fit.slope_stderr = std::sqrt(sw / det);
    return fit;
}

} // namespace sticky
