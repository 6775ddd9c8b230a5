#pragma once

// Seeded scenario synthesis for the rolling simulator: who plugs in with what
// energy, who leaves early, the bootstrap history of the departure ratio, and
// the law of the regulation signal. A Scenario is pure data; the loop that
// consumes it lives in rolling.hpp.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "../departure.hpp"
#include "../fleet.hpp"

namespace evflex {

// uniform: fresh draw over the cleared band each interval. walk: clipped
// random walk across the band. extreme_hold: pin the signal to one endpoint
// for the whole horizon, the hardest case for SOC tracking.
enum class SignalMode { uniform, walk, extreme_hold };

inline const char* to_string(SignalMode m) {
    switch (m) {
        case SignalMode::uniform: return "uniform";
        case SignalMode::walk: return "walk";
        case SignalMode::extreme_hold: return "extreme-hold";
    }
    return "?";
}

inline SignalMode parse_signal_mode(const std::string& s) {
    if (s == "uniform") return SignalMode::uniform;
    if (s == "walk") return SignalMode::walk;
    if (s == "extreme-hold" || s == "extreme_hold") return SignalMode::extreme_hold;
    throw ConfigError("unknown signal mode '" + s + "' (uniform | walk | extreme-hold)");
}

struct ScenarioConfig {
    int horizon = 12;
    double dt_h = 1.0 / 12.0;
    std::uint64_t seed = 1;
    double soc_frac_lo = 0.3;  // arrival energy draw, fraction of usable range
    double soc_frac_hi = 0.8;
    double hazard = 0.007;  // chance an EV cuts out at each interior boundary
    double early_rating_cap = 0.05;  // max fleet charge-rating share leaving per boundary
    int bootstrap_len = 20;          // pre-run u history length
    double boot_u_lo = 0.8;
    double boot_u_hi = 0.9;
    // Market acceptance: cleared band = alpha-scaled promise. 0 is allowed and
    // collapses the cleared band to the idle point, which removes regulation
    // uncertainty entirely; useful as the fully deterministic case.
    double alpha = 1.0;
    SignalMode signal = SignalMode::uniform;
    bool hold_upper = false;  // extreme_hold endpoint choice
    double walk_step = 0.35;  // walk increment as a fraction of band width

    void validate() const {
        if (horizon < 1) throw ConfigError("scenario horizon must be at least 1 interval");
        if (!(dt_h > 0.0)) throw ConfigError("interval duration must be positive");
        if (!(soc_frac_lo >= 0.0 && soc_frac_lo <= soc_frac_hi && soc_frac_hi <= 1.0))
            throw ConfigError("arrival energy fractions need 0 <= lo <= hi <= 1");
        if (!(hazard >= 0.0 && hazard <= 1.0))
            throw ConfigError("departure hazard must lie in [0, 1]");
        if (!(early_rating_cap >= 0.0 && early_rating_cap <= 1.0))
            throw ConfigError("early-rating cap must lie in [0, 1]");
        if (bootstrap_len < 1) throw ConfigError("bootstrap history needs at least 1 sample");
        if (!(boot_u_lo >= 0.0 && boot_u_lo <= boot_u_hi && boot_u_hi <= 1.0))
            throw ConfigError("bootstrap u range needs 0 <= lo <= hi <= 1");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("acceptance factor must lie in [0, 1]");
        if (!(walk_step > 0.0 && walk_step <= 1.0))
            throw ConfigError("walk step must lie in (0, 1]");
    }
};

struct Scenario {
    std::vector<EvParams> params;         // one per session row, same order
    std::vector<SessionRecord> sessions;  // arrival/departure schedule + arrival energy
    std::vector<double> bootstrap_u;      // oldest first
    ScenarioConfig cfg;
};

namespace detail {

// 53-bit uniform in [0, 1) straight from the generator's bits, so scenario
// content never depends on a library's distribution implementation.
inline double unit_draw(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}

inline Scenario generate_scenario(const FleetSpec& spec, const ScenarioConfig& cfg) {
    cfg.validate();
    if (spec.total_count() <= 0) throw ConfigError("scenario needs a non-empty fleet");
    for (const FleetType& t : spec.types) t.params.validate(t.name.empty() ? "type" : t.name);
    Scenario sc;
    sc.cfg = cfg;
    std::mt19937_64 g(cfg.seed);
    int id = 0;
    double fleet_rating = 0.0;
    for (const FleetType& t : spec.types) {
        for (int i = 0; i < t.count; ++i, ++id) {
            const double q =
                cfg.soc_frac_lo + (cfg.soc_frac_hi - cfg.soc_frac_lo) * detail::unit_draw(g);
            SessionRecord s;
            s.ev_id = id;
            s.type = t.name;
            s.arrival = 0;
            s.reported_departure = cfg.horizon;
            s.actual_departure = cfg.horizon;
            s.arrival_soc_kwh = t.params.e_min_kwh + q * (t.params.e_max_kwh - t.params.e_min_kwh);
            sc.params.push_back(t.params);
            sc.sessions.push_back(std::move(s));
            fleet_rating += t.params.p_ch_max_kw;
        }
    }
    // Early leavers: at each interior boundary every still-connected EV may cut
    // its session short, but the per-boundary total is capped by charge-rating
    // share so a single boundary cannot gut the fleet.
    for (int b = 1; b < cfg.horizon; ++b) {
        double budget = cfg.early_rating_cap * fleet_rating;
        for (size_t i = 0; i < sc.sessions.size(); ++i) {
            SessionRecord& s = sc.sessions[i];
            if (s.actual_departure != s.reported_departure) continue;  // already leaving early
            if (b >= s.reported_departure) continue;
            if (detail::unit_draw(g) >= cfg.hazard) continue;
            if (sc.params[i].p_ch_max_kw > budget) continue;
            budget -= sc.params[i].p_ch_max_kw;
            s.actual_departure = b;
        }
    }
    // Bootstrap history, with the range floor placed last so it stays inside
    // every sliding sample window reachable within the horizon.
    sc.bootstrap_u.resize(static_cast<size_t>(cfg.bootstrap_len));
    for (int i = 0; i + 1 < cfg.bootstrap_len; ++i)
        sc.bootstrap_u[i] =
            cfg.boot_u_lo + (cfg.boot_u_hi - cfg.boot_u_lo) * detail::unit_draw(g);
    sc.bootstrap_u[static_cast<size_t>(cfg.bootstrap_len) - 1] = cfg.boot_u_lo;
    return sc;
}

// Wraps ingested session rows as a scenario: schedules come from the file,
// everything else (signal law, market, bootstrap) from the config.
inline Scenario scenario_from_sessions(const std::vector<SessionRecord>& sessions,
                                       const std::map<std::string, EvParams>& types,
                                       std::vector<double> bootstrap_u,
                                       const ScenarioConfig& cfg) {
    cfg.validate();
    if (sessions.empty()) throw DataError("no sessions");
    if (bootstrap_u.empty()) throw ConfigError("scenario needs a bootstrap u history");
    Scenario sc;
    sc.cfg = cfg;
    sc.bootstrap_u = std::move(bootstrap_u);
    for (size_t i = 0; i < sessions.size(); ++i) {
        const SessionRecord& s = sessions[i];
        auto it = types.find(s.type);
        if (it == types.end())
            throw DataError("session row " + std::to_string(i) + ": unknown EV type '" + s.type +
                            "'");
        const EvParams& ev = it->second;
        if (s.arrival_soc_kwh < ev.e_min_kwh - 1e-9 || s.arrival_soc_kwh > ev.e_max_kwh + 1e-9)
            throw DataError("session row " + std::to_string(i) + ": arrival energy " +
                            std::to_string(s.arrival_soc_kwh) + " outside type '" + s.type + "'");
        sc.params.push_back(ev);
        sc.sessions.push_back(s);
    }
    return sc;
}

}
