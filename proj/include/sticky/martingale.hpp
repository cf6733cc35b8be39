#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sticky/cells.hpp"
#include "sticky/error.hpp"
#include "sticky/npoint.hpp"
#include "sticky/parallel.hpp"
#include "sticky/path.hpp"
#include "sticky/stats.hpp"
#include "sticky/theta.hpp"

namespace sticky {

struct DriftStatistic {
    double mean = 0.0;          // ensemble mean of f(X_t) - f(X_s) - int_s^t A f(X_u) du
    double stderr = 0.0;
    double z = 0.0;
    double mean_increment = 0.0;
    double mean_compensator = 0.0;
    std::size_t replicas = 0;
};

/// f(X_t) - f(X_s) - int_s^t A f(X_u) du for one path over all of its rows,
/// with the integral taken as a left-point sum over snapped states.
inline double drift_residual(const Path& path, const PiecewiseLinearFn& f, const ThetaFamily& theta,
                             double diagonal_tolerance, double* compensator = nullptr) {
    if (path.N != f.dimension()) throw Error("drift_test: path and function dimensions differ");
    if (path.rows() < 2) throw Error("drift_test: path needs at least two rows");
    double comp = 0.0;
    auto N = static_cast<std::size_t>(path.N);
    for (std::size_t k = 0; k + 1 < path.rows(); ++k) {
        std::span<const double> x(path.row(k), N);
        auto snapped = snap_to_clusters(x, diagonal_tolerance);
        comp += apply_operator(f, snapped, theta) * (path.times[k + 1] - path.times[k]);
    }
    if (compensator) *compensator = comp;
    std::span<const double> first(path.row(0), N), last(path.row(path.rows() - 1), N);
    return f(last) - f(first) - comp;
}

inline DriftStatistic drift_statistic(std::span<const double> residuals, std::span<const double> increments,
                                      std::span<const double> compensators) {
    Estimate e = mean_estimate(residuals);
    DriftStatistic d;
    d.mean = e.value;
    d.stderr = e.stderr;
    d.z = e.stderr > 0.0 ? e.value / e.stderr : (e.value == 0.0 ? 0.0 : std::copysign(INFINITY, e.value));
    d.mean_increment = mean_estimate(increments).value;
    d.mean_compensator = mean_estimate(compensators).value;
    d.replicas = residuals.size();
    return d;
}

/// z-score of the ensemble mean of the martingale residual; |z| <= 3 is the
/// expected outcome when the paths solve the martingale problem.
inline DriftStatistic drift_test(std::span<const Path> paths, const PiecewiseLinearFn& f, const ThetaFamily& theta,
                                 double diagonal_tolerance) {
    if (paths.size() < 2) throw Error("drift_test: need at least two replicas");
    std::vector<double> residuals, increments, compensators;
    for (const auto& p : paths) {
        double comp = 0.0;
        residuals.push_back(drift_residual(p, f, theta, diagonal_tolerance, &comp));
        compensators.push_back(comp);
        increments.push_back(residuals.back() + comp);
    }
    return drift_statistic(residuals, increments, compensators);
}

/// Simulates `replicas` prelimit paths from `sim` (replica i seeded by
/// (sim.seed, "marttest", i)) and runs the drift test of every function on the
/// same ensemble.
inline std::vector<DriftStatistic> run_drift_test(const SimConfig& sim, const std::vector<PiecewiseLinearFn>& fs,
                                                  const ThetaFamily& theta, double diagonal_tolerance,
                                                  std::size_t replicas, unsigned workers = 1) {
    if (replicas < 2) throw Error("drift_test: need at least two replicas");
    sim.validate();
    struct Row {
        std::vector<double> residual, compensator;
        std::vector<double> increment;
    };
    auto rows = parallel_map(replicas, workers, [&](std::size_t i) {
        SimConfig cfg = sim;
        cfg.seed = derive_seed(sim.seed, "marttest", i);
        Path p = simulate(cfg);
        Row r;
        for (const auto& f : fs) {
            double comp = 0.0;
            r.residual.push_back(drift_residual(p, f, theta, diagonal_tolerance, &comp));
            r.compensator.push_back(comp);
            r.increment.push_back(r.residual.back() + comp);
        }
        return r;
    });
    std::vector<DriftStatistic> out;
    for (std::size_t j = 0; j < fs.size(); ++j) {
        std::vector<double> res, inc, comp;
        for (const auto& r : rows) {
            res.push_back(r.residual[j]);
            inc.push_back(r.increment[j]);
            comp.push_back(r.compensator[j]);
        }
        out.push_back(drift_statistic(res, inc, comp));
    }
    return out;
}

} // namespace sticky
