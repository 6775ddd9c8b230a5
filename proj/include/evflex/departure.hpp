#pragma once

// Early-departure uncertainty channel: u samples comparing actual vs.
// virtual (no-early-leaving) flexibility, and the data-driven Wasserstein
// ambiguity description of u used by the robust evaluator.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fleet.hpp"

namespace evflex {

struct USample {
    int interval = 0;
    double value = 1.0;
};

// Empirical distribution (uniform weights over `samples`) with transport
// radius `epsilon` and interval support [u_lo, u_hi]. The support polyhedron
// is Hu <= h with H = [-1, 1]^T, h = [-u_lo, u_hi]^T.
struct AmbiguitySet {
    std::vector<double> samples;
    double epsilon = 0.0;
    double u_lo = 0.0;
    double u_hi = 0.0;

    int size() const { return static_cast<int>(samples.size()); }
    double mean() const {
        double s = 0.0;
        for (double v : samples) s += v;
        return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
    }
};

inline AmbiguitySet build_ambiguity(const std::vector<double>& samples, double epsilon) {
    if (samples.empty())
        throw ConfigError("ambiguity set needs at least one sample (no fallback invented)");
    if (!(epsilon >= 0.0)) throw ConfigError("transport radius must be nonnegative");
    AmbiguitySet set;
    set.samples = samples;
    set.epsilon = epsilon;
    set.u_lo = *std::min_element(samples.begin(), samples.end());
    set.u_hi = *std::max_element(samples.begin(), samples.end());
    for (double v : samples)
        if (!std::isfinite(v)) throw ConfigError("ambiguity sample is not finite");
    return set;
}

inline AmbiguitySet build_ambiguity(const std::vector<USample>& samples, double epsilon) {
    std::vector<double> vs;
    vs.reserve(samples.size());
    for (const USample& s : samples) vs.push_back(s.value);
    return build_ambiguity(vs, epsilon);
}

// sup over the ambiguity set of E[a*u], by the transport closed form: the
// adversary shifts the empirical mean by at most epsilon toward the favorable
// support endpoint, capped by the endpoint itself.
inline double worst_case_expectation(double a, const AmbiguitySet& set) {
    const double mean = set.mean();
    if (a >= 0.0) return a * std::min(mean + set.epsilon, set.u_hi);
    return a * std::max(mean - set.epsilon, set.u_lo);
}

// inf over the ambiguity set of E[a*u].
inline double best_case_expectation(double a, const AmbiguitySet& set) {
    return -worst_case_expectation(-a, set);
}

// Width ratio of actual to virtual flexibility, clamped into [0, 1]. A
// zero-width virtual band means there was no flexibility to lose.
inline double compute_u(const FlexibilityBand& actual, const FlexibilityBand& virt) {
    const double vw = virt.width();
    if (vw <= 0.0) {
        log(LogLevel::warn, "virtual band has zero width; u defined as 1");
        return 1.0;
    }
    const double r = actual.width() / vw;
    if (r < -1e-9 || r > 1.0 + 1e-9)
        log(LogLevel::warn, "u ratio " + std::to_string(r) + " clamped into [0, 1]");
    return std::clamp(r, 0.0, 1.0);
}

// Membership selectors. Callers pass the arrived population; these filter by
// the two departure channels.
inline std::vector<std::pair<EvParams, double>> members_by_actual(
    const std::vector<EvParams>& params, const std::vector<EvState>& states, int m) {
    std::vector<std::pair<EvParams, double>> out;
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i].actual_departure > m) out.push_back({params[i], states[i].soc_kwh});
    return out;
}

inline std::vector<std::pair<EvParams, double>> members_by_reported(
    const std::vector<EvParams>& params, const std::vector<EvState>& states, int m) {
    std::vector<std::pair<EvParams, double>> out;
    for (size_t i = 0; i < states.size(); ++i)
        if (states[i].reported_departure > m) out.push_back({params[i], states[i].soc_kwh});
    return out;
}

// Band of the EVs truly present in interval m (ground truth).
inline FlexibilityBand compute_actual_band(const std::vector<EvParams>& params,
                                           const std::vector<EvState>& states, int m, double dt_h,
                                           const opt::SolverConfig& scfg = {}) {
    return fleet_band(members_by_actual(params, states, m), dt_h, scfg);
}

// Band of the EVs that would be present had nobody left early; vehicles that
// did leave contribute at their last known energy (idle counterfactual).
inline FlexibilityBand compute_virtual_band(const std::vector<EvParams>& params,
                                            const std::vector<EvState>& states, int m, double dt_h,
                                            const opt::SolverConfig& scfg = {}) {
    return fleet_band(members_by_reported(params, states, m), dt_h, scfg);
}

inline USample compute_u_sample(const std::vector<EvParams>& params,
                                const std::vector<EvState>& states, int m, double dt_h,
                                const opt::SolverConfig& scfg = {}) {
    return {m, compute_u(compute_actual_band(params, states, m, dt_h, scfg),
                         compute_virtual_band(params, states, m, dt_h, scfg))};
}

struct SessionRecord {
    int ev_id = 0;
    std::string type;
    int arrival = 0;
    int reported_departure = 0;
    int actual_departure = 0;
    double arrival_soc_kwh = 0.0;
};

// Comma-separated session rows: ev_id,type,arrival,reported_departure,
// actual_departure,arrival_soc. '#' comments; an optional header line
// starting with 'ev_id' is skipped.
inline std::vector<SessionRecord> parse_sessions(std::istream& in,
                                                 const std::string& origin = "sessions") {
    std::vector<SessionRecord> out;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
        if (trimmed.empty()) continue;
        if (trimmed.rfind("ev_id", 0) == 0) continue;  // header
        std::vector<std::string> cols;
        std::istringstream ls(trimmed);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cell.erase(0, cell.find_first_not_of(" \t"));
            cell.erase(cell.find_last_not_of(" \t\r") + 1);
            cols.push_back(cell);
        }
        if (cols.size() != 6) fail("expected 6 columns, got " + std::to_string(cols.size()));
        SessionRecord rec;
        try {
            rec.ev_id = std::stoi(cols[0]);
            rec.type = cols[1];
            rec.arrival = std::stoi(cols[2]);
            rec.reported_departure = std::stoi(cols[3]);
            rec.actual_departure = std::stoi(cols[4]);
            rec.arrival_soc_kwh = std::stod(cols[5]);
        } catch (const std::exception&) {
            fail("malformed numeric field");
        }
        if (rec.type.empty()) fail("empty type");
        if (rec.arrival < 0) fail("negative arrival");
        if (rec.actual_departure > rec.reported_departure)
            fail("actual departure " + std::to_string(rec.actual_departure) +
                 " after reported " + std::to_string(rec.reported_departure));
        if (rec.arrival > rec.actual_departure)
            fail("arrival " + std::to_string(rec.arrival) + " after departure " +
                 std::to_string(rec.actual_departure));
        out.push_back(std::move(rec));
    }
    return out;
}

// Replays session records interval by interval and computes the u series.
// Session files carry no regulation trajectory, so vehicles hold their
// recorded arrival energy while present.
inline std::vector<USample> ingest_u_samples(const std::vector<SessionRecord>& sessions,
                                             const std::map<std::string, EvParams>& types,
                                             double dt_h, int horizon = -1,
                                             const opt::SolverConfig& scfg = {}) {
    std::vector<EvParams> params;
    std::vector<EvState> states;
    std::vector<int> arrivals;
    int max_m = 0;
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
        params.push_back(ev);
        EvState st;
        st.ev_id = s.ev_id;
        st.soc_kwh = s.arrival_soc_kwh;
        st.reported_departure = s.reported_departure;
        st.actual_departure = s.actual_departure;
        states.push_back(st);
        arrivals.push_back(s.arrival);
        max_m = std::max(max_m, s.reported_departure);
    }
    const int K = horizon >= 0 ? horizon : max_m;
    std::vector<USample> out;
    for (int m = 0; m < K; ++m) {
        std::vector<EvParams> p_m;
        std::vector<EvState> s_m;
        for (size_t i = 0; i < states.size(); ++i) {
            if (arrivals[i] <= m) {
                p_m.push_back(params[i]);
                s_m.push_back(states[i]);
            }
        }
        out.push_back(compute_u_sample(p_m, s_m, m, dt_h, scfg));
    }
    return out;
}

}
