#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sticky/error.hpp"
#include "sticky/parallel.hpp"

namespace sticky {

inline constexpr const char* code_version = "1.0.0";

/// Usage errors carry the offending key in the message.
using UsageError = ConfigError;

/// Thrown by parse_config for --help; what() is the help text.
class HelpRequested : public Error {
public:
    using Error::Error;
};

enum class ParamType { integer, real, text, boolean, reals };

struct ParamSpec {
    std::string key;
    std::string default_value;
    ParamType type = ParamType::real;
    std::string help;
    std::optional<double> min;          // inclusive lower bound
    bool strict_min = false;            // min is exclusive
    std::vector<std::string> choices;   // allowed values of a text parameter
};

struct CommandSpec {
    std::string name;
    std::string help;
    std::vector<ParamSpec> params;
};

namespace detail {

inline ParamSpec integer(std::string key, std::string def, std::string help, std::optional<double> min = std::nullopt) {
    return {std::move(key), std::move(def), ParamType::integer, std::move(help), min, false, {}};
}
inline ParamSpec real(std::string key, std::string def, std::string help, std::optional<double> min = std::nullopt,
                      bool strict = false) {
    return {std::move(key), std::move(def), ParamType::real, std::move(help), min, strict, {}};
}
inline ParamSpec positive(std::string key, std::string def, std::string help) {
    return real(std::move(key), std::move(def), std::move(help), 0.0, true);
}
inline ParamSpec text(std::string key, std::string def, std::string help, std::vector<std::string> choices = {}) {
    return {std::move(key), std::move(def), ParamType::text, std::move(help), std::nullopt, false, std::move(choices)};
}
inline ParamSpec flag(std::string key, std::string def, std::string help) {
    return {std::move(key), std::move(def), ParamType::boolean, std::move(help), std::nullopt, false, {}};
}
inline ParamSpec reals(std::string key, std::string def, std::string help) {
    return {std::move(key), std::move(def), ParamType::reals, std::move(help), std::nullopt, false, {}};
}

} // namespace detail

/// Parameter schema of every subcommand.
inline const std::vector<CommandSpec>& command_specs() {
    using namespace detail;
    static const std::vector<CommandSpec> specs = {
        {"theta",
         "table of theta(k:l) for k, l >= 1, k + l <= nmax",
         {integer("nmax", "5", "largest k + l", 2), positive("a", "1", "curvature of psi at 0"),
          positive("b", "1", "independent diffusivity"),
          text("method", "quadrature", "quadrature, montecarlo or nu", {"quadrature", "montecarlo", "nu"}),
          integer("samples", "1000000", "Monte Carlo samples", 2), positive("tol", "1e-12", "quadrature tolerance"),
          flag("fold", "false", "only emit k <= l")}},
        {"cells", "census of the cells of R^N", {integer("n", "3", "dimension N", 1)}},
        {"marttest",
         "martingale-problem drift test on prelimit paths",
         {integer("N", "3", "number of points", 2), integer("n", "1000", "scaling parameter", 1),
          positive("a", "1", "curvature of psi at 0"), positive("b", "10", "independent diffusivity"),
          text("f", "hinge", "absdiff or hinge", {"absdiff", "hinge"}),
          text("upper", "1", "upper index set of the hinge, 1-based, comma separated"),
          text("lower", "2,3", "lower index set (hinge) or second index (absdiff)"),
          positive("horizon", "0.02", "time horizon"), positive("c", "0.05", "step as dt a^2 n^2"),
          integer("replicas", "200", "paths", 2), positive("delta", "3", "cluster tolerance in units of 1/(a n)"),
          integer("record_every", "100", "steps per recorded row", 1)}},
        {"simulate",
         "Euler-Maruyama path of the prelimit N-point motion",
         {integer("N", "2", "number of points", 1), integer("n", "10", "scaling parameter", 1),
          positive("a", "1", "curvature of psi at 0"), positive("b", "1", "independent diffusivity"),
          reals("x0", "", "start, comma separated (default all 0)"), positive("dt", "1e-4", "time step"),
          positive("horizon", "1", "time horizon"), text("driver", "dense", "dense or fourier", {"dense", "fourier"}),
          integer("features", "1024", "Fourier features", 1), integer("record_every", "1", "steps per row", 1),
          text("format", "csv", "csv or binary", {"csv", "binary"})}},
        {"sticky",
         "reference sticky Brownian motion by time change",
         {positive("theta", "0.3183098861837907", "stickiness"), real("z0", "0", "start"),
          positive("horizon", "1", "time horizon"), positive("dt", "1e-3", "output grid step"),
          positive("variance_rate", "1", "variance rate away from 0"),
          real("bm_step", "0", "step of the driving Brownian motion (0: dt/4)", 0.0),
          text("estimator", "tanaka", "local time estimator", {"tanaka", "bridge"}),
          real("band", "0", "half width of the occupation band", 0.0)}},
        {"exits",
         "exit time and exit cell of the projected prelimit from D(eps)",
         {integer("N", "3", "number of points", 2), integer("n", "1000", "scaling parameter", 1),
          positive("a", "1", "curvature of psi at 0"), positive("b", "1", "independent diffusivity"),
          positive("epsilon", "0.1", "width of D(eps)"), real("gap", "0", "cluster gap (0: eps/50)", 0.0),
          integer("replicas", "1000", "replicas", 2), positive("c", "0.0125", "Euler step as dt a^2 n^2"),
          text("method", "euler", "euler or timechange (N = 2)", {"euler", "timechange"}),
          positive("bm_step", "1e-6", "Brownian step of the time change")}},
        {"radial",
         "radial function f0 of the rescaled radial generator",
         {integer("N", "3", "number of points", 2), positive("a", "1", "curvature of psi at 0"),
          positive("b", "1", "independent diffusivity"), positive("rmax", "50", "largest radius"),
          integer("points", "200", "grid points", 2)}},
        {"ballcheck",
         "exit of the prelimit from the ball B(eps/n)",
         {integer("N", "3", "number of points", 2), integer("n", "1000", "scaling parameter", 1),
          positive("a", "1", "curvature of psi at 0"), positive("b", "1", "independent diffusivity"),
          positive("epsilon", "0.05", "ball radius times n"), integer("replicas", "2000", "replicas", 2),
          positive("c", "0.05", "Euler step as dt a^2 n^2")}},
        {"coalesce",
         "coalescing Brownian motions and the splitting exponent",
         {text("mode", "splitting", "paths or splitting", {"paths", "splitting"}),
          reals("starts", "1,0,-1", "ordered starting points (paths)"), positive("horizon", "1", "time horizon (paths)"),
          positive("dt", "1e-3", "time step (paths)"), positive("R", "1", "target spread (splitting)"),
          reals("ratios", "0.03125,0.0625,0.125,0.25", "values of r/R (splitting)"),
          integer("trials", "100000", "trials per ratio", 2), positive("step_factor", "0.1", "adaptive step factor"),
          positive("floor", "1e-3", "gap floor relative to the initial spread")}},
        {"kernel",
         "stochastic flow of kernels by filtering or by the SPDE",
         {text("mode", "filter", "filter or spde", {"filter", "spde"}), positive("a", "20", "curvature of psi at 0"),
          positive("b", "0.375", "independent diffusivity"), integer("n", "1", "scaling parameter", 1),
          positive("t", "1", "time"), real("x0", "-1", "start (negative: middle of the domain)"),
          integer("cells", "512", "grid cells", 4), real("length", "0", "periodic domain (0: ten correlation lengths)", 0.0),
          integer("particles", "4000", "filter particles", 1), real("dt", "0", "time step (0: CFL step)", 0.0),
          positive("cfl", "0.25", "diffusion CFL number of the default step"),
          flag("field", "true", "drive with the random field"), integer("snapshots", "16", "rows of the heatmap", 1)}},
    };
    return specs;
}

inline const CommandSpec& command_spec(const std::string& name) {
    for (const auto& c : command_specs())
        if (c.name == name) return c;
    std::string known;
    for (const auto& c : command_specs()) known += (known.empty() ? "" : ", ") + c.name;
    throw UsageError("unknown subcommand '" + name + "' (expected one of: " + known + ")");
}

/// Fully resolved invocation.
struct RunConfig {
    std::string subcommand;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 1;
    std::string out = ".";
    unsigned workers = 1;
    bool deterministic = false;

    const std::string& raw(const std::string& key) const {
        auto it = params.find(key);
        if (it == params.end()) throw UsageError("missing required key '" + key + "'");
        return it->second;
    }
    long long integer(const std::string& key) const;
    double real(const std::string& key) const;
    const std::string& text(const std::string& key) const { return raw(key); }
    bool boolean(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n\"'");
    auto e = s.find_last_not_of(" \t\r\n\"'");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline bool parse_integer(const std::string& s, long long& out) {
    std::istringstream is(s);
    is >> out;
    return !is.fail() && is.eof();
}

inline bool parse_real(const std::string& s, double& out) {
    std::istringstream is(s);
    is >> out;
    return !is.fail() && is.eof();
}

inline bool parse_bool(const std::string& s, bool& out) {
    std::string v = s;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
    return false;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::string body = trim(s);
    if (!body.empty() && body.front() == '[') body = body.substr(1);
    if (!body.empty() && body.back() == ']') body.pop_back();
    std::istringstream is(body);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline std::string format_min(const ParamSpec& p) {
    std::ostringstream os;
    os << *p.min;
    return p.key + " must be " + (p.strict_min ? "> " : "≥ ") + os.str();
}

inline void check_value(const ParamSpec& p, const std::string& value) {
    auto mismatch = [&](const char* what) {
        throw UsageError("key '" + p.key + "': expected " + what + ", got '" + value + "'");
    };
    auto bound = [&](double v) {
        if (p.min && (p.strict_min ? !(v > *p.min) : !(v >= *p.min))) throw UsageError(format_min(p));
    };
    switch (p.type) {
    case ParamType::integer: {
        long long v;
        if (!parse_integer(value, v)) mismatch("an integer");
        bound(static_cast<double>(v));
        break;
    }
    case ParamType::real: {
        double v;
        if (!parse_real(value, v)) mismatch("a real number");
        bound(v);
        break;
    }
    case ParamType::boolean: {
        bool v;
        if (!parse_bool(value, v)) mismatch("true or false");
        break;
    }
    case ParamType::reals:
        for (const auto& item : split_list(value)) {
            double v;
            if (!parse_real(item, v)) mismatch("a comma separated list of reals");
        }
        break;
    case ParamType::text:
        if (!p.choices.empty() && std::find(p.choices.begin(), p.choices.end(), value) == p.choices.end()) {
            std::string all;
            for (const auto& c : p.choices) all += (all.empty() ? "" : ", ") + c;
            throw UsageError("key '" + p.key + "': '" + value + "' is not one of " + all);
        }
        break;
    }
}

} // namespace detail

inline long long RunConfig::integer(const std::string& key) const {
    long long v;
    if (!detail::parse_integer(raw(key), v)) throw UsageError("key '" + key + "' is not an integer");
    return v;
}

inline double RunConfig::real(const std::string& key) const {
    double v;
    if (!detail::parse_real(raw(key), v)) throw UsageError("key '" + key + "' is not a real number");
    return v;
}

inline bool RunConfig::boolean(const std::string& key) const {
    bool v;
    if (!detail::parse_bool(raw(key), v)) throw UsageError("key '" + key + "' is not a boolean");
    return v;
}

inline std::vector<double> RunConfig::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split_list(raw(key))) {
        double v;
        if (!detail::parse_real(item, v)) throw UsageError("key '" + key + "' is not a list of reals");
        out.push_back(v);
    }
    return out;
}

/// Parses `subcommand [--key value ...]` (program name excluded). A config
/// file given by --config holds flat `key = value` lines with # comments;
/// flags override file values and unknown keys are rejected. The output
/// directory falls back to $STICKY_FLOWS_OUT, then to ".".
inline RunConfig parse_config(const std::vector<std::string>& args) {
    if (args.empty()) throw UsageError("missing subcommand");
    const CommandSpec& spec = command_spec(args.front());
    RunConfig cfg;
    cfg.subcommand = spec.name;

    CLI::App app{spec.help, "sticky_flows " + spec.name};
    app.allow_config_extras(false);
    app.set_config("--config", "", "flat key = value file");
    std::uint64_t seed = 1;
    std::string out;
    unsigned workers = default_workers();
    bool deterministic = false;
    app.add_option("--seed", seed, "master seed");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output directory");
    app.add_flag("--deterministic", deterministic, "suppress timestamps in artifacts");
    std::map<std::string, std::string> values;
    for (const auto& p : spec.params) {
        values[p.key] = p.default_value;
        // Lists keep their commas: they are parsed by check_value, not by CLI11.
        static const char* type_names[] = {"INT", "REAL", "TEXT", "BOOL", "REALS"};
        app.add_option("--" + p.key, values[p.key], p.help)
            ->delimiter('\0')
            ->type_name(type_names[static_cast<int>(p.type)])
            ->default_str(p.default_value);
    }
    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw UsageError(spec.name + ": " + e.what());
    }
    for (const auto& p : spec.params) {
        values[p.key] = detail::trim(values[p.key]);
        if (p.type == ParamType::reals && values[p.key].empty()) continue;
        detail::check_value(p, values[p.key]);
    }
    cfg.params = std::move(values);
    cfg.seed = seed;
    cfg.workers = workers;
    cfg.deterministic = deterministic;
    if (!out.empty()) {
        cfg.out = out;
    } else if (const char* env = std::getenv("STICKY_FLOWS_OUT"); env && *env) {
        cfg.out = env;
    }
    return cfg;
}

} // namespace sticky
