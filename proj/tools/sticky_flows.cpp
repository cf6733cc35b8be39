#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "sticky/config.hpp"
#include "sticky/sticky.hpp"
#include "sticky/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace sticky;

namespace {

/// The resolved config as embedded in artifacts. The worker count is left
/// out: it does not change any output.
ordered_json config_json(const RunConfig& cfg) {
    ordered_json j;
    j["version"] = code_version;
    j["subcommand"] = cfg.subcommand;
    j["seed"] = cfg.seed;
    ordered_json p = ordered_json::object();
    for (const auto& [k, v] : cfg.params) p[k] = v;
    j["params"] = p;
    return j;
}

class Artifacts {
public:
    explicit Artifacts(const RunConfig& cfg) : cfg_(cfg), dir_(cfg.out) { fs::create_directories(dir_); }

    std::ofstream open(const std::string& name, bool binary = false) {
        fs::path p = dir_ / name;
        std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
        if (!os) throw Error("cannot write " + p.string());
        written_.push_back(p.string());
        return os;
    }

    /// CSV with the schema tag and the config as leading comment lines.
    std::ofstream csv(const std::string& name, const std::string& schema, const std::string& header) {
        auto os = open(name);
        os << "# schema " << schema << "\n# config " << config_json(cfg_).dump() << "\n";
        if (!header.empty()) os << header << "\n";
        os.precision(17);
        return os;
    }

    void json(const std::string& name, const ordered_json& results) {
        ordered_json j;
        j["config"] = config_json(cfg_);
        j["results"] = results;
        auto os = open(name);
        os << j.dump(2) << "\n";
    }

    svg::PlotOptions plot(std::string title, std::string x_label, std::string y_label) const {
        svg::PlotOptions o;
        o.title = std::move(title);
        o.x_label = std::move(x_label);
        o.y_label = std::move(y_label);
        o.comment = "sticky_flows " + config_json(cfg_).dump();
        if (!cfg_.deterministic) {
            std::time_t now = std::time(nullptr);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
            o.comment += " generated " + std::string(buf);
        }
        return o;
    }

    const std::vector<std::string>& written() const { return written_; }

private:
    const RunConfig& cfg_;
    fs::path dir_;
    std::vector<std::string> written_;
};

ordered_json estimate_json(const Estimate& e) { return {{"value", e.value}, {"stderr", e.stderr}}; }

ScaledModel model_of(const RunConfig& c) {
    return ScaledModel(CovarianceModel::gaussian(c.real("a")), static_cast<int>(c.integer("n")), c.real("b"));
}

std::vector<int> index_list(const std::string& key, const std::string& text, int N) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int i = 0;
        try {
            i = std::stoi(item);
        } catch (const std::exception&) {
            throw UsageError("key '" + key + "': '" + item + "' is not an index");
        }
        if (i < 1 || i > N) throw UsageError("key '" + key + "': index " + item + " is outside 1.." + std::to_string(N));
        out.push_back(i - 1);
    }
    if (out.empty()) throw UsageError("key '" + key + "' is empty");
    return out;
}

void path_plot(Artifacts& art, const Path& p, const std::string& name, const std::string& title) {
    std::vector<svg::Series> series;
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    std::size_t stride = std::max<std::size_t>(1, p.rows() / 2000);
    for (int i = 0; i < p.N; ++i) {
        svg::Series s;
        s.label = "x" + std::to_string(i + 1);
        s.color = colors[i % 8];
        for (std::size_t k = 0; k < p.rows(); k += stride) {
            s.x.push_back(p.times[k]);
            s.y.push_back(p.at(k, i));
        }
        series.push_back(std::move(s));
    }
    auto os = art.open(name);
    svg::line_plot(os, series, art.plot(title, "t", "x"));
}

ordered_json run_theta(const RunConfig& c, Artifacts& art) {
    FamilyOptions opt;
    opt.tol = c.real("tol");
    opt.samples = static_cast<std::uint64_t>(c.integer("samples"));
    opt.seed = c.seed;
    opt.workers = c.workers;
    ThetaMethod method = parse_theta_method(c.text("method"));
    auto fam = build_family(static_cast<int>(c.integer("nmax")), c.real("a"), c.real("b"), method, opt);
    bool fold = c.boolean("fold");
    auto os = art.csv("theta.csv", "theta/1", "k,l,theta,method,error_bound");
    std::size_t rows = 0;
    for (const auto& [kl, v] : fam.entries()) {
        if (fold && kl.first > kl.second) continue;
        os << kl.first << ',' << kl.second << ',' << v.value << ',' << to_string(method) << ',' << v.error_bound << "\n";
        ++rows;
    }
    return {{"rows", rows}, {"consistency_residual", fam.consistency_residual()}};
}

ordered_json run_cells(const RunConfig& c, Artifacts& art) {
    int N = static_cast<int>(c.integer("n"));
    if (N > max_cell_dimension) throw UsageError("n must be ≤ " + std::to_string(max_cell_dimension));
    auto cells = enumerate_cells(N);
    auto os = art.csv("cells.csv", "cells/1", "index,cell,blocks,full_dimensional");
    std::size_t full = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        os << i << ',' << cells[i].describe() << ',' << cells[i].blocks() << ',' << (cells[i].full() ? 1 : 0) << "\n";
        full += cells[i].full() ? 1 : 0;
    }
    return {{"cells", cells.size()}, {"ordered_bell", ordered_bell(N)}, {"full_dimensional", full}};
}

ordered_json run_marttest(const RunConfig& c, Artifacts& art) {
    int N = static_cast<int>(c.integer("N"));
    ScaledModel s = model_of(c);
    double a = c.real("a"), n = static_cast<double>(s.n);
    SimConfig sim(s);
    sim.N = N;
    sim.x0.assign(static_cast<std::size_t>(N), 0.0);
    sim.dt = c.real("c") / (a * a * n * n);
    sim.horizon = c.real("horizon");
    sim.seed = c.seed;
    sim.record_every = static_cast<std::size_t>(c.integer("record_every"));
    auto upper = index_list("upper", c.text("upper"), N);
    auto lower = index_list("lower", c.text("lower"), N);
    PiecewiseLinearFn f = c.text("f") == "hinge" ? PiecewiseLinearFn::hinge(N, upper, lower)
                                                 : PiecewiseLinearFn::abs_diff(N, upper.front(), lower.front());
    auto theta = build_family(std::max(N, 2), a, c.real("b"), ThetaMethod::quadrature);
    double delta = c.real("delta") / (a * n);
    auto stat = run_drift_test(sim, {f}, theta, delta, static_cast<std::size_t>(c.integer("replicas")), c.workers).front();
    ordered_json r = {{"mean_residual", stat.mean},         {"stderr", stat.stderr},
                      {"z", stat.z},                        {"mean_increment", stat.mean_increment},
                      {"mean_compensator", stat.mean_compensator}, {"replicas", stat.replicas},
                      {"diagonal_tolerance", delta}};
    art.json("marttest.json", r);
    return r;
}

ordered_json run_simulate(const RunConfig& c, Artifacts& art) {
    SimConfig sim(model_of(c));
    sim.N = static_cast<int>(c.integer("N"));
    sim.x0 = c.reals("x0");
    if (sim.x0.empty()) sim.x0.assign(static_cast<std::size_t>(sim.N), 0.0);
    sim.dt = c.real("dt");
    sim.horizon = c.real("horizon");
    sim.seed = c.seed;
    sim.driver = parse_driver(c.text("driver"));
    sim.fourier_features = static_cast<std::size_t>(c.integer("features"));
    sim.record_every = static_cast<std::size_t>(c.integer("record_every"));
    Path p = simulate(sim);
    if (c.text("format") == "binary") {
        auto os = art.open("simulate.bin", true);
        write_binary(p, os);
    } else {
        auto os = art.csv("simulate.csv", "path/1", "");
        write_csv(p, os);
    }
    path_plot(art, p, "simulate.svg", "prelimit " + std::to_string(sim.N) + "-point motion");
    ordered_json meta = ordered_json::object();
    for (const auto& [k, v] : p.meta) meta[k] = v;
    ordered_json r = {{"rows", p.rows()}, {"meta", meta}};
    art.json("simulate.json", r);
    return r;
}

ordered_json run_sticky(const RunConfig& c, Artifacts& art) {
    StickyParams p;
    p.theta = c.real("theta");
    p.z0 = c.real("z0");
    p.horizon = c.real("horizon");
    p.dt = c.real("dt");
    p.seed = c.seed;
    p.variance_rate = c.real("variance_rate");
    p.bm_step = c.real("bm_step");
    p.estimator = c.text("estimator") == "bridge" ? LocalTimeEstimator::bridge : LocalTimeEstimator::tanaka;
    Path path = simulate_sticky(p);
    {
        auto os = art.csv("sticky.csv", "path/1", "");
        write_csv(path, os);
    }
    path_plot(art, path, "sticky.svg", "sticky Brownian motion");
    auto zero = occupation_statistics(path, 0.0);
    ordered_json r = {{"rows", path.rows()}, {"zero_set_fraction", zero.zero_set_fraction}};
    if (c.real("band") > 0.0) r["time_in_band"] = occupation_statistics(path, c.real("band")).time_in_band;
    for (const auto& [k, v] : path.meta) r["meta"][k] = v;
    art.json("sticky.json", r);
    return r;
}

ordered_json run_exits_cmd(const RunConfig& c, Artifacts& art) {
    ScaledModel s = model_of(c);
    double a = c.real("a"), n = static_cast<double>(s.n);
    SimConfig sim(s);
    sim.N = static_cast<int>(c.integer("N"));
    sim.x0.assign(static_cast<std::size_t>(sim.N), 0.0);
    sim.dt = c.real("c") / (a * a * n * n);
    sim.seed = c.seed;
    ExitExperiment e(sim);
    e.epsilon = c.real("epsilon");
    e.cluster_gap = c.real("gap");
    e.replicas = static_cast<std::size_t>(c.integer("replicas"));
    e.method = c.text("method") == "timechange" ? ExitMethod::timechange : ExitMethod::euler;
    e.bm_step = c.real("bm_step");
    e.workers = c.workers;
    auto warnings = e.validate();
    ExitStats st = run_exits(e);
    ordered_json r;
    r["mean_exit_time"] = estimate_json(st.mean_exit_time());
    Estimate m = st.mean_exit_time();
    r["mean_exit_time_over_epsilon"] = estimate_json({m.value / e.epsilon, m.stderr / e.epsilon});
    r["completed"] = st.completed();
    r["budget_exceeded"] = st.budget_exceeded();
    r["multi_cluster"] = estimate_json(st.multi_cluster_probability());
    auto os = art.csv("exits.csv", "exits/1", "cell,upper_mask,probability,stderr");
    ordered_json cells = ordered_json::array();
    for (auto mask : st.cells()) {
        Estimate p = st.cell_probability(mask);
        os << describe_bipartition(st.N, mask) << ',' << mask << ',' << p.value << ',' << p.stderr << "\n";
        cells.push_back({{"cell", describe_bipartition(st.N, mask)}, {"probability", p.value}, {"stderr", p.stderr}});
    }
    r["cells"] = cells;
    ordered_json th = ordered_json::array();
    for (const auto& t : estimate_theta(st, e.epsilon))
        th.push_back({{"k", t.k}, {"l", t.l}, {"theta", t.value.value}, {"stderr", t.value.stderr}});
    r["theta_estimates"] = th;
    r["warnings"] = warnings;
    art.json("exits.json", r);
    return r;
}

ordered_json run_radial(const RunConfig& c, Artifacts& art) {
    int N = static_cast<int>(c.integer("N"));
    double a = c.real("a"), b = c.real("b"), rmax = c.real("rmax");
    auto points = static_cast<std::size_t>(c.integer("points"));
    std::vector<double> grid;
    for (std::size_t i = 1; i <= points; ++i) grid.push_back(rmax * static_cast<double>(i) / static_cast<double>(points));
    RadialTable t = radial_f0(N, a, b, grid);
    double g = gamma_const(N);
    auto os = art.csv("radial.csv", "radial/1", "r,f0,df0,f0_over_r");
    svg::Series s{"f0(r)/r", {}, {}, "#1f77b4"}, asym{"1/(gamma a b)", {}, {}, "#d62728"};
    for (std::size_t i = 0; i < t.r.size(); ++i) {
        os << t.r[i] << ',' << t.f[i] << ',' << t.df[i] << ',' << t.f[i] / t.r[i] << "\n";
        s.x.push_back(t.r[i]);
        s.y.push_back(t.f[i] / t.r[i]);
        asym.x.push_back(t.r[i]);
        asym.y.push_back(1.0 / (g * a * b));
    }
    {
        auto svg_os = art.open("radial.svg");
        svg::line_plot(svg_os, {s, asym}, art.plot("radial function, N = " + std::to_string(N), "r", "f0(r)/r"));
    }
    ordered_json r = {{"gamma", g},
                      {"asymptote", 1.0 / (g * a * b)},
                      {"f0_over_r_at_rmax", t.f.back() / t.r.back()},
                      {"relative_gap_at_rmax", t.f.back() / t.r.back() * g * a * b - 1.0}};
    art.json("radial.json", r);
    return r;
}

ordered_json run_ballcheck(const RunConfig& c, Artifacts& art) {
    auto res = ball_exit_time_check(static_cast<int>(c.integer("N")), c.real("a"), c.real("b"), static_cast<int>(c.integer("n")),
                                    c.real("epsilon"), static_cast<std::size_t>(c.integer("replicas")), c.seed, c.real("c"),
                                    c.workers);
    ordered_json r = {{"mean_exit_time", estimate_json(res.mean_exit_time)},
                      {"predicted", res.predicted},
                      {"radial_ode", res.exact},
                      {"ratio_to_predicted", res.mean_exit_time.value / res.predicted},
                      {"uniformity_tested", res.uniformity_tested},
                      {"kuiper_statistic", res.kuiper_statistic},
                      {"kuiper_p", res.kuiper_p},
                      {"budget_exceeded", res.budget_exceeded},
                      {"status", res.status}};
    art.json("ballcheck.json", r);
    return r;
}

ordered_json run_coalesce(const RunConfig& c, Artifacts& art) {
    ordered_json r;
    if (c.text("mode") == "paths") {
        CoalescingSystem sys{c.reals("starts"), c.real("dt"), c.seed};
        Stream rng(c.seed, "coalesce", 0);
        auto run = simulate_coalescing(sys, c.real("horizon"), rng);
        {
            auto os = art.csv("coalesce.csv", "path/1", "");
            write_csv(run.path, os);
        }
        path_plot(art, run.path, "coalesce.svg", "coalescing Brownian motions");
        ordered_json merges = ordered_json::array();
        for (const auto& m : run.merges) merges.push_back({{"time", m.time}, {"upper", m.upper + 1}, {"lower", m.lower + 1}});
        r["merges"] = merges;
    } else {
        SplittingOptions opt;
        opt.step_factor = c.real("step_factor");
        opt.floor_factor = c.real("floor");
        opt.workers = c.workers;
        double R = c.real("R");
        auto fit = splitting_slope(c.reals("ratios"), R, static_cast<std::size_t>(c.integer("trials")), c.seed, opt);
        auto os = art.csv("coalesce.csv", "splitting/1", "r_over_R,probability,stderr");
        svg::Series pts{"log P", {}, {}, "#1f77b4"}, line{"fit", {}, {}, "#d62728"};
        for (std::size_t i = 0; i < fit.ratios.size(); ++i) {
            os << fit.ratios[i] << ',' << fit.estimates[i].value << ',' << fit.estimates[i].stderr << "\n";
            pts.x.push_back(std::log(fit.ratios[i]));
            pts.y.push_back(std::log(fit.estimates[i].value));
            line.x.push_back(std::log(fit.ratios[i]));
            line.y.push_back(fit.fit.intercept + fit.fit.slope * std::log(fit.ratios[i]));
        }
        {
            auto svg_os = art.open("coalesce.svg");
            svg::line_plot(svg_os, {pts, line}, art.plot("splitting probability", "log(r/R)", "log P"));
        }
        r["slope"] = fit.fit.slope;
        r["slope_stderr"] = fit.fit.slope_stderr;
    }
    art.json("coalesce.json", r);
    return r;
}

ordered_json run_kernel(const RunConfig& c, Artifacts& art) {
    ScaledModel s = model_of(c);
    double t = c.real("t");
    auto M = static_cast<std::size_t>(c.integer("cells"));
    double L = c.real("length") > 0.0 ? c.real("length") : default_kernel_length(s);
    double x0 = c.real("x0") >= 0.0 ? c.real("x0") : L / 2.0;
    double dt = c.real("dt") > 0.0 ? c.real("dt") : spde_stable_dt(s, L / static_cast<double>(M), c.real("cfl"));
    auto snapshots = static_cast<std::size_t>(c.integer("snapshots"));
    bool field = c.boolean("field");
    Stream field_rng(c.seed, "field", 0);
    std::vector<KernelField> snaps;
    ordered_json r;
    if (c.text("mode") == "spde") {
        KernelField f = KernelField::point_mass(L, M, x0);
        SpdeOptions opt;
        opt.field_enabled = field;
        SpdeDiagnostics total;
        double mass0 = f.mass();
        for (std::size_t k = 1; k <= snapshots; ++k) {
            double target = t * static_cast<double>(k) / static_cast<double>(snapshots);
            SpdeDiagnostics d;
            f = spde_evolve(f, s, target - f.t, dt, field_rng, opt, &d);
            total.steps += d.steps;
            total.negative_cell_steps += d.negative_cell_steps;
            total.flux_mass_drift = std::max(total.flux_mass_drift, d.flux_mass_drift);
            snaps.push_back(f);
        }
        total.negative_fraction = static_cast<double>(total.negative_cell_steps) / static_cast<double>(total.steps * M);
        r["steps"] = total.steps;
        r["negative_fraction"] = total.negative_fraction;
        r["flagged"] = total.negative_fraction >= 1e-3;
        r["relative_mass_change"] = std::abs(snaps.back().mass() - mass0) / mass0;
    } else {
        Stream particle_rng(c.seed, "particles", 0);
        FilterOptions opt;
        opt.particles = static_cast<std::size_t>(c.integer("particles"));
        opt.cells = M;
        opt.length = L;
        opt.dt = dt;
        opt.field_enabled = field;
        snaps = filter_kernel_snapshots(s, x0, t, field_rng, particle_rng, opt, snapshots);
        r["particle_seed"] = particle_rng.seed();
    }
    r["field_seed"] = field_rng.seed();
    r["length"] = L;
    r["dt"] = dt;
    r["boundary"] = "periodic";
    const KernelField& last = snaps.back();
    auto stats = density_stats(last);
    r["mass"] = last.mass();
    r["mean"] = last.mean();
    r["max_mass"] = stats.max_mass;
    r["entropy"] = stats.entropy;
    r["support_fraction"] = stats.support_fraction;
    {
        auto os = art.csv("kernel.csv", "kernel/1", "t,x,density");
        for (const auto& f : snaps)
            for (std::size_t i = 0; i < f.cells(); ++i) os << f.t << ',' << f.center(i) << ',' << f.v[i] << "\n";
    }
    {
        auto os = art.open("kernel.bin", true);
        write_binary_header(os, static_cast<std::uint32_t>(M), snaps.size(), t / static_cast<double>(snapshots), field_rng.seed(), 1u);
        for (const auto& f : snaps) os.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(M * sizeof(double)));
    }
    {
        svg::Series line{"t = " + svg::detail::num(last.t), {}, {}, "#1f77b4"};
        for (std::size_t i = 0; i < last.cells(); ++i) {
            line.x.push_back(last.center(i));
            line.y.push_back(last.v[i]);
        }
        auto os = art.open("kernel.svg");
        svg::line_plot(os, {line}, art.plot("kernel density (" + c.text("mode") + ")", "y", "density"));
    }
    {
        std::vector<std::vector<double>> rows;
        for (const auto& f : snaps) rows.push_back(f.v);
        auto os = art.open("kernel_heatmap.svg");
        svg::heatmap(os, rows, 0.0, L, 0.0, t, art.plot("kernel density over time", "y", "t"));
    }
    art.json("kernel.json", r);
    return r;
}

int usage() {
    std::cout << "usage: sticky_flows <subcommand> [--key value ...] [--seed S] [--workers W] [--out DIR] [--config FILE] "
                 "[--deterministic]\n\nsubcommands:\n";
    for (const auto& c : command_specs()) std::cout << "  " << c.name << "  " << c.help << "\n";
    std::cout << "\nrun `sticky_flows <subcommand> --help` for its keys\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args.front() == "--help" || args.front() == "-h") return usage();
    ordered_json record;
    try {
        RunConfig cfg = parse_config(args);
        Artifacts art(cfg);
        ordered_json results;
        const std::string& cmd = cfg.subcommand;
        if (cmd == "theta") results = run_theta(cfg, art);
        else if (cmd == "cells") results = run_cells(cfg, art);
        else if (cmd == "marttest") results = run_marttest(cfg, art);
        else if (cmd == "simulate") results = run_simulate(cfg, art);
        else if (cmd == "sticky") results = run_sticky(cfg, art);
        else if (cmd == "exits") results = run_exits_cmd(cfg, art);
        else if (cmd == "radial") results = run_radial(cfg, art);
        else if (cmd == "ballcheck") results = run_ballcheck(cfg, art);
        else if (cmd == "coalesce") results = run_coalesce(cfg, art);
        else results = run_kernel(cfg, art);
        record["status"] = "ok";
        record["subcommand"] = cmd;
        record["results"] = results;
        record["artifacts"] = art.written();
        std::cout << record.dump(2) << "\n";
        return 0;
    } catch (const HelpRequested& h) {
        std::cout << h.what();
        return 0;
    } catch (const ConfigError& e) {
        record = {{"status", "error"}, {"kind", "usage"}, {"message", e.what()}};
        std::cout << record.dump(2) << "\n";
        return 2;
    } catch (const std::exception& e) {
        record = {{"status", "error"}, {"kind", "runtime"}, {"message", e.what()}};
        std::cout << record.dump(2) << "\n";
        return 1;
    }
}
