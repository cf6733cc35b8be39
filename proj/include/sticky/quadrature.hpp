#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <algorithm>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sticky/error.hpp"

namespace sticky::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [lo, hi]: the panel with the
/// largest error estimate is bisected until the total estimate is below
/// `abs_tol`. Throws QuadratureError when `max_panels` is exhausted first.
template <typename F>
Result adaptive(F&& f, double lo, double hi, double abs_tol, unsigned max_panels = 4000) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    struct Panel {
        double lo, hi, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    // Kronrod abscissae are stored for x >= 0; odd indices are the Gauss nodes.
    const auto& x = GK::abscissa();
    const auto& wk = GK::weights();
    const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
    auto eval = [&](double a, double b) {
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double fc = f(mid);
        double kronrod = wk[0] * fc, gauss = wg[0] * fc;
        for (std::size_t i = 1; i < x.size(); ++i) {
            double pair = f(mid - half * x[i]) + f(mid + half * x[i]);
            kronrod += wk[i] * pair;
            if (i % 2 == 0) gauss += wg[i / 2] * pair;
        }
        double err = std::max(std::abs(kronrod - gauss), 50.0 * std::numeric_limits<double>::epsilon() * std::abs(kronrod));
        return Panel{a, b, half * kronrod, half * err};
    };
    std::vector<Panel> heap{eval(lo, hi)};
    double error = heap.front().error;
    while (error > abs_tol && heap.size() < max_panels) {
        std::pop_heap(heap.begin(), heap.end());
        Panel worst = heap.back();
        double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            std::push_heap(heap.begin(), heap.end());
            break;
        }
        Panel left = eval(worst.lo, mid), right = eval(mid, worst.hi);
        error += left.error + right.error - worst.error;
        heap.back() = left;
        std::push_heap(heap.begin(), heap.end());
        heap.push_back(right);
        std::push_heap(heap.begin(), heap.end());
    }
    double value = 0.0;
    error = 0.0;
    for (const auto& p : heap) {
        value += p.value;
        error += p.error;
    }
    if (!std::isfinite(value) || error > abs_tol)
        throw QuadratureError("adaptive quadrature did not reach tolerance", error);
    return {value, error};
}

/// Adaptive quadrature over consecutive breakpoints, splitting the tolerance evenly.
template <typename F>
Result adaptive(F&& f, std::span<const double> breakpoints, double abs_tol, unsigned max_panels = 4000) {
    Result total;
    double share = abs_tol / static_cast<double>(breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        Result piece = adaptive(f, breakpoints[i], breakpoints[i + 1], share, max_panels);
        total.value += piece.value;
        total.error += piece.error;
    }
    return total;
}

/// A fixed composite Gauss-Legendre rule, symmetric about the midpoint of [lo, hi].
/// Nodes come in mirror pairs so that reflected integrands sum identically.
class SymmetricRule {
public:
    static constexpr unsigned order = 20;

    /// `panels` Gauss-Legendre panels cover [0, half_width]; the mirror image covers [-half_width, 0].
    SymmetricRule(double half_width, unsigned panels) {
        using Gauss = boost::math::quadrature::gauss<double, order>;
        const auto& x = Gauss::abscissa();
        const auto& w = Gauss::weights();
        double panel = half_width / panels;
        for (unsigned p = 0; p < panels; ++p) {
            double mid = (p + 0.5) * panel;
            for (std::size_t i = 0; i < x.size(); ++i) {
                double weight = w[i] * 0.5 * panel;
                nodes_.push_back(mid + 0.5 * panel * x[i]);
                weights_.push_back(weight);
                if (x[i] != 0.0) {
                    nodes_.push_back(mid - 0.5 * panel * x[i]);
                    weights_.push_back(weight);
                }
            }
        }
    }

    /// Positive-side nodes; the rule integrates f over [-H, H] as sum w (f(z) + f(-z)).
    std::span<const double> nodes() const noexcept { return nodes_; }
    std::span<const double> weights() const noexcept { return weights_; }

    template <typename F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) s += weights_[i] * (f(nodes_[i]) + f(-nodes_[i]));
        return s;
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

} // namespace sticky::quad
