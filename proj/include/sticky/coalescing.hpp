#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sticky/error.hpp"
#include "sticky/parallel.hpp"
#include "sticky/path.hpp"
#include "sticky/rng.hpp"
#include "sticky/stats.hpp"

namespace sticky {

/// Brownian motions started at starts[0] >= starts[1] >= ... that move
/// together once they meet.
struct CoalescingSystem {
    std::vector<double> starts;
    double dt = 1e-3;
    std::uint64_t seed = 1;

    void validate() const {
        if (starts.empty()) throw Error("coalescing: need at least one path");
        if (!(dt > 0.0)) throw Error("coalescing: dt must be positive");
        for (std::size_t i = 1; i < starts.size(); ++i)
            if (starts[i] > starts[i - 1]) throw Error("coalescing: starts must be ordered B1 >= B2 >= ...");
    }
};

struct MergeEvent {
    double time = 0.0;
    int upper = 0;  // smallest index of the upper cluster
    int lower = 0;  // smallest index of the lower cluster
};

struct CoalescingRun {
    Path path;
    std::vector<MergeEvent> merges;
};

/// Each cluster receives its own increment; adjacent clusters merge when they
/// cross within a step or when a Brownian bridge of their gap (variance rate 2)
/// touches 0, which happens with probability exp(-g0 g1 / dt).
inline CoalescingRun simulate_coalescing(const CoalescingSystem& sys, double horizon, Stream& rng) {
    sys.validate();
    if (!(horizon >= sys.dt)) throw Error("coalescing: horizon must be at least dt");
    int N = static_cast<int>(sys.starts.size());
    // Clusters ordered from the top: position and the member indices.
    struct Cluster {
        double x;
        std::vector<int> members;
    };
    std::vector<Cluster> clusters;
    CoalescingRun run;
    for (int i = 0; i < N; ++i) {
        if (!clusters.empty() && clusters.back().x == sys.starts[static_cast<std::size_t>(i)]) {
            clusters.back().members.push_back(i);
            run.merges.push_back({0.0, clusters.back().members.front(), i});
        } else {
            clusters.push_back({sys.starts[static_cast<std::size_t>(i)], {i}});
        }
    }
    std::size_t steps = static_cast<std::size_t>(std::llround(horizon / sys.dt));
    Path& p = run.path;
    p.N = N;
    p.dt = sys.dt;
    p.seed = rng.seed();
    std::vector<double> row(static_cast<std::size_t>(N));
    auto record = [&](double t) {
        for (const auto& c : clusters)
            for (int m : c.members) row[static_cast<std::size_t>(m)] = c.x;
        p.times.push_back(t);
        p.states.insert(p.states.end(), row.begin(), row.end());
    };
    record(0.0);
    double sd = std::sqrt(sys.dt);
    std::vector<double> before;
    for (std::size_t k = 1; k <= steps; ++k) {
        double t = static_cast<double>(k) * sys.dt;
        before.resize(clusters.size());
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            before[c] = clusters[c].x;
            clusters[c].x += sd * rng.normal();
        }
        // Decide merges between originally adjacent clusters, then collapse.
        std::vector<char> merge(clusters.size(), 0);
        for (std::size_t c = 0; c + 1 < clusters.size(); ++c) {
            double g0 = before[c] - before[c + 1], g1 = clusters[c].x - clusters[c + 1].x;
            double u = rng.uniform();
            merge[c] = g1 <= 0.0 || u < std::exp(-g0 * g1 / sys.dt);
        }
        std::vector<Cluster> next;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            if (c > 0 && merge[c - 1]) {
                auto& top = next.back();
                run.merges.push_back({t, top.members.front(), clusters[c].members.front()});
                double w1 = static_cast<double>(top.members.size()), w2 = static_cast<double>(clusters[c].members.size());
                top.x = (w1 * top.x + w2 * clusters[c].x) / (w1 + w2);
                top.members.insert(top.members.end(), clusters[c].members.begin(), clusters[c].members.end());
            } else {
                next.push_back(std::move(clusters[c]));
            }
        }
        clusters = std::move(next);
        // A merged position can overtake a neighbour; merge until ordered.
        for (bool again = true; again;) {
            again = false;
            for (std::size_t c = 0; c + 1 < clusters.size(); ++c) {
                if (clusters[c].x <= clusters[c + 1].x) {
                    run.merges.push_back({t, clusters[c].members.front(), clusters[c + 1].members.front()});
                    double w1 = static_cast<double>(clusters[c].members.size()), w2 = static_cast<double>(clusters[c + 1].members.size());
                    clusters[c].x = (w1 * clusters[c].x + w2 * clusters[c + 1].x) / (w1 + w2);
                    clusters[c].members.insert(clusters[c].members.end(), clusters[c + 1].members.begin(), clusters[c + 1].members.end());
                    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(c + 1));
                    again = true;
                    break;
                }
            }
        }
        record(t);
    }
    return run;
}

struct SplittingOptions {
    double step_factor = 0.1;     // dt = step_factor * (distance to the nearest boundary)^2
    double floor_factor = 1e-3;   // gaps below floor_factor * r count as met
    std::size_t max_steps = 10'000'000;
    unsigned workers = 1;
};

namespace detail {

/// One trial in the gap coordinates g1 = B1 - B2, g2 = B2 - B3: true when the
/// spread B1 - B3 reaches R while both gaps are still positive.
inline bool splitting_trial(double g1, double g2, double R, const SplittingOptions& opt, Stream& rng) {
    double floor = opt.floor_factor * (g1 + g2);
    auto bridge = [](double d0, double d1, double rate, double dt) { return std::exp(-2.0 * d0 * d1 / (rate * dt)); };
    for (std::size_t k = 0; k < opt.max_steps; ++k) {
        double d = std::min({g1, g2, R - g1 - g2});
        if (g1 < floor || g2 < floor) return false;
        if (R - g1 - g2 < floor) return true;
        double dt = opt.step_factor * d * d, sd = std::sqrt(dt);
        double w1 = sd * rng.normal(), w2 = sd * rng.normal(), w3 = sd * rng.normal();
        double h1 = g1 + w1 - w2, h2 = g2 + w2 - w3;
        if (h1 <= 0.0 || h2 <= 0.0) return false;
        // Each gap and the spread are Brownian with variance rate 2 between grid points.
        double p1 = bridge(g1, h1, 2.0, dt), p2 = bridge(g2, h2, 2.0, dt);
        if (rng.uniform() < p1 + p2 - p1 * p2) return false;
        if (h1 + h2 >= R) return true;
        if (rng.uniform() < bridge(R - g1 - g2, R - h1 - h2, 2.0, dt)) return true;
        g1 = h1;
        g2 = h2;
    }
    throw Error("splitting_probability: trial exceeded the step budget");
}

} // namespace detail

/// P(the spread of three coalescing paths reaches R with the middle path
/// still distinct), started from (r/2, 0, -r/2). Trial i uses the stream
/// derived from (seed, "splitting", i).
inline Estimate splitting_probability(double r, double R, std::size_t trials, std::uint64_t seed,
                                      const SplittingOptions& opt = {}) {
    if (!(R > 0.0) || r < 0.0 || r > R / 2.0) throw Error("splitting_probability: need 0 <= r <= R/2");
    if (trials < 2) throw Error("splitting_probability: need at least two trials");
    if (r == 0.0) return {0.0, 0.0};
    constexpr std::size_t block = 4096;
    std::size_t blocks = (trials + block - 1) / block;
    auto counts = parallel_map(blocks, opt.workers, [&](std::size_t b) {
        std::size_t hits = 0, end = std::min(trials, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            Stream rng(seed, "splitting", i);
            hits += detail::splitting_trial(r / 2.0, r / 2.0, R, opt, rng) ? 1 : 0;
        }
        return hits;
    });
    double hits = 0.0;
    for (auto c : counts) hits += static_cast<double>(c);
    double n = static_cast<double>(trials), p = hits / n;
    return {p, std::sqrt(p * (1.0 - p) / (n - 1.0))};
}

struct SlopeFit {
    std::vector<double> ratios;
    std::vector<Estimate> estimates;
    LineFit fit;
};

/// Weighted least squares of log P against log(r/R), weights from the
/// delta-method variance of log P.
inline SlopeFit splitting_slope(const std::vector<double>& ratios, double R, std::size_t trials, std::uint64_t seed,
                                const SplittingOptions& opt = {}) {
    SlopeFit out;
    std::vector<double> x, y, w;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        Estimate e = splitting_probability(ratios[i] * R, R, trials, derive_seed(seed, "slope", i), opt);
        out.ratios.push_back(ratios[i]);
        out.estimates.push_back(e);
        if (e.value <= 0.0) throw Error("splitting_slope: no successes at r/R = " + std::to_string(ratios[i]));
        x.push_back(std::log(ratios[i]));
        y.push_back(std::log(e.value));
        double rel = e.stderr / e.value;
        w.push_back(1.0 / (rel * rel));
    }
    out.fit = weighted_line_fit(x, y, w);
    return out;
}

} // namespace sticky
