#pragma once

// Run configuration: flat "key = value" text, '#' comments, strict keys.
// Every knob has a default, so an empty file is a valid config; unknown or
// duplicate keys are rejected so typos cannot silently fall back to defaults.
// The canonical dump (fixed key order, shortest-round-trip floats) feeds the
// 64-bit FNV-1a hash that output files embed, so two runs with the same hash
// really did use the same effective configuration, CLI overrides included.
//
// Schema (see docs/config.md for the annotated version):
//   fleet sessions out_dir                        paths
//   method gamma epsilon window                   evaluation
//   horizon dt_h seed alpha signal hold_upper walk_step
//   hazard early_rating_cap soc_frac_lo soc_frac_hi
//   bootstrap_len boot_u_lo boot_u_hi             scenario
//   solver time_limit_s mip_gap node_limit
//   estimation_mip_gap estimation_node_limit containment_weight score_tol_kw
//   jobs

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <set>
#include <string>

#include "common.hpp"
#include "evaluator.hpp"
#include "opt/solve.hpp"
#include "sim/rolling.hpp"
#include "sim/scenario.hpp"

namespace evflex {

struct RunConfig {
    std::string fleet_file = "data/fleet_default.txt";
    std::string sessions_file;  // empty: synthesize the scenario instead
    std::string out_dir = "out";

    Method method = Method::m4;
    double gamma = 1.0;
    double epsilon = 0.02;
    int window = 20;

    int horizon = 12;
    double dt_h = 1.0 / 12.0;
    std::uint64_t seed = 1;
    double alpha = 1.0;
    SignalMode signal = SignalMode::uniform;
    bool hold_upper = false;
    double walk_step = 0.35;
    double hazard = 0.007;
    double early_rating_cap = 0.05;
    int bootstrap_len = 20;
    double boot_u_lo = 0.8;
    double boot_u_hi = 0.9;
    double soc_frac_lo = 0.3;
    double soc_frac_hi = 0.8;

    std::string solver = "builtin";
    double time_limit_s = 120.0;
    double mip_gap = 1e-6;
    int node_limit = 50000;
    double estimation_mip_gap = 1e-4;
    long estimation_node_limit = 200;
    double containment_weight = 1e4;
    double score_tol_kw = 1e-3;

    int jobs = 1;

    ScenarioConfig scenario_config() const {
        ScenarioConfig sc;
        sc.horizon = horizon;
        sc.dt_h = dt_h;
        sc.seed = seed;
        sc.soc_frac_lo = soc_frac_lo;
        sc.soc_frac_hi = soc_frac_hi;
        sc.hazard = hazard;
        sc.early_rating_cap = early_rating_cap;
        sc.bootstrap_len = bootstrap_len;
        sc.boot_u_lo = boot_u_lo;
        sc.boot_u_hi = boot_u_hi;
        sc.alpha = alpha;
        sc.signal = signal;
        sc.hold_upper = hold_upper;
        sc.walk_step = walk_step;
        return sc;
    }

    RobustConfig robust_config() const { return {gamma, epsilon, window}; }

    opt::SolverConfig solver_config() const {
        opt::SolverConfig s;
        s.backend = solver;
        s.time_limit_s = time_limit_s;
        s.mip_gap = mip_gap;
        s.node_limit = node_limit;
        return s;
    }

    RunOptions run_options() const {
        RunOptions r;
        r.method = method;
        r.robust = robust_config();
        r.score_tol_kw = score_tol_kw;
        r.containment_weight = containment_weight;
        r.estimation_mip_gap = estimation_mip_gap;
        r.estimation_node_limit = estimation_node_limit;
        r.solver = solver_config();
        return r;
    }

    void validate() const {
        if (solver != "builtin")
            throw ConfigError("solver backend '" + solver +
                              "' is unavailable; this build provides 'builtin'"
                              " (config key: solver, flag: --solver)");
        if (jobs < 1) throw ConfigError("jobs must be at least 1");
        if (fleet_file.empty()) throw ConfigError("fleet file path is empty (config key: fleet)");
        scenario_config().validate();
        run_options().validate();
    }

    std::string canonical_text() const;
    std::uint64_t hash() const;
};

namespace detail {

inline std::string cfg_num(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}

// Everything that can influence a computed value, in fixed order. Execution
// details (out_dir, jobs) stay out: runs that differ only in where files land
// or how many workers ran are the same experiment and must hash alike.
inline std::string RunConfig::canonical_text() const {
    using detail::cfg_num;
    std::string s;
    auto put = [&s](const std::string& k, const std::string& v) {
        s += k;
        s += " = ";
        s += v;
        s += '\n';
    };
    put("fleet", fleet_file);
    put("sessions", sessions_file);
    put("method", to_string(method));
    put("gamma", cfg_num(gamma));
    put("epsilon", cfg_num(epsilon));
    put("window", std::to_string(window));
    put("horizon", std::to_string(horizon));
    put("dt_h", cfg_num(dt_h));
    put("seed", std::to_string(seed));
    put("alpha", cfg_num(alpha));
    put("signal", to_string(signal));
    put("hold_upper", hold_upper ? "1" : "0");
    put("walk_step", cfg_num(walk_step));
    put("hazard", cfg_num(hazard));
    put("early_rating_cap", cfg_num(early_rating_cap));
    put("bootstrap_len", std::to_string(bootstrap_len));
    put("boot_u_lo", cfg_num(boot_u_lo));
    put("boot_u_hi", cfg_num(boot_u_hi));
    put("soc_frac_lo", cfg_num(soc_frac_lo));
    put("soc_frac_hi", cfg_num(soc_frac_hi));
    put("solver", solver);
    put("time_limit_s", cfg_num(time_limit_s));
    put("mip_gap", cfg_num(mip_gap));
    put("node_limit", std::to_string(node_limit));
    put("estimation_mip_gap", cfg_num(estimation_mip_gap));
    put("estimation_node_limit", std::to_string(estimation_node_limit));
    put("containment_weight", cfg_num(containment_weight));
    put("score_tol_kw", cfg_num(score_tol_kw));
    return s;
}

inline std::uint64_t RunConfig::hash() const { return detail::fnv1a(canonical_text()); }

namespace detail {

inline std::string cfg_trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double cfg_double(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected a number, got '" + v + "'");
    }
}

inline long long cfg_int(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return i;
    } catch (const std::exception&) {
        throw ConfigError(where + ": expected an integer, got '" + v + "'");
    }
}

inline bool cfg_bool(const std::string& v, const std::string& where) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError(where + ": expected a boolean (true/false/1/0), got '" + v + "'");
}

// Shared by the file parser and CLI flag overrides; `where` prefixes errors.
inline void cfg_set(RunConfig& c, const std::string& key, const std::string& value,
                    const std::string& where) {
    if (key == "fleet")
        c.fleet_file = value;
    else if (key == "sessions")
        c.sessions_file = value;
    else if (key == "out_dir")
        c.out_dir = value;
    else if (key == "method")
        c.method = parse_method(value);
    else if (key == "gamma")
        c.gamma = cfg_double(value, where);
    else if (key == "epsilon")
        c.epsilon = cfg_double(value, where);
    else if (key == "window")
        c.window = static_cast<int>(cfg_int(value, where));
    else if (key == "horizon")
        c.horizon = static_cast<int>(cfg_int(value, where));
    else if (key == "dt_h")
        c.dt_h = cfg_double(value, where);
    else if (key == "seed")
        c.seed = static_cast<std::uint64_t>(cfg_int(value, where));
    else if (key == "alpha")
        c.alpha = cfg_double(value, where);
    else if (key == "signal")
        c.signal = parse_signal_mode(value);
    else if (key == "hold_upper")
        c.hold_upper = cfg_bool(value, where);
    else if (key == "walk_step")
        c.walk_step = cfg_double(value, where);
    else if (key == "hazard")
        c.hazard = cfg_double(value, where);
    else if (key == "early_rating_cap")
        c.early_rating_cap = cfg_double(value, where);
    else if (key == "bootstrap_len")
        c.bootstrap_len = static_cast<int>(cfg_int(value, where));
    else if (key == "boot_u_lo")
        c.boot_u_lo = cfg_double(value, where);
    else if (key == "boot_u_hi")
        c.boot_u_hi = cfg_double(value, where);
    else if (key == "soc_frac_lo")
        c.soc_frac_lo = cfg_double(value, where);
    else if (key == "soc_frac_hi")
        c.soc_frac_hi = cfg_double(value, where);
    else if (key == "solver")
        c.solver = value;
    else if (key == "time_limit_s")
        c.time_limit_s = cfg_double(value, where);
    else if (key == "mip_gap")
        c.mip_gap = cfg_double(value, where);
    else if (key == "node_limit")
        c.node_limit = static_cast<int>(cfg_int(value, where));
    else if (key == "estimation_mip_gap")
        c.estimation_mip_gap = cfg_double(value, where);
    else if (key == "estimation_node_limit")
        c.estimation_node_limit = static_cast<long>(cfg_int(value, where));
    else if (key == "containment_weight")
        c.containment_weight = cfg_double(value, where);
    else if (key == "score_tol_kw")
        c.score_tol_kw = cfg_double(value, where);
    else if (key == "jobs")
        c.jobs = static_cast<int>(cfg_int(value, where));
    else
        throw ConfigError(where + ": unknown config key '" + key + "'");
}

}

inline RunConfig parse_config_text(std::istream& in, const std::string& origin = "config") {
    RunConfig c;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (size_t hash_pos = line.find('#'); hash_pos != std::string::npos)
            line.erase(hash_pos);
        line = detail::cfg_trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        std::string key = detail::cfg_trim(line.substr(0, eq));
        std::string value = detail::cfg_trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key before '='");
        if (!seen.insert(key).second)
            throw ConfigError(where + ": duplicate config key '" + key + "'");
        detail::cfg_set(c, key, value, where);
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "' (flag: --config)");
    return parse_config_text(f, path);
}

}
