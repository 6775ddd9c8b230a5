#pragma once

// Trace and scorecard files. Everything is tab-separated text with a '#'
// header block; floats are written shortest-round-trip so a written trace
// replays bit-exactly. Header block of a trace:
//   # evflex <version>            tool version
//   # config_hash <16 hex>       hash of the producing configuration
//   # method / gamma / epsilon / window / horizon / dt_h / alpha / signal /
//   # seed / n_ev                 one "# key value" line each
//   # ev <id> <type> <arrival> <reported> <actual> <soc0
//   #    > <p_ch> <p_dis> <e_max> <e_min> <eta_ch> <eta_dis>   one line per EV
//   # columns: ...                the data row layout
// Data rows: k, promised band, cleared band, signal, realized, clamped flag,
// actual band, u, presence bitstring, per-EV power, per-EV end energy, and the
// per-EV planning interval around that end energy.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "../version.hpp"
#include "rolling.hpp"

namespace evflex {

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}

inline void write_output_header(std::ostream& os, std::uint64_t config_hash) {
    os << "# evflex " << kVersion << "\n";
    os << "# config_hash " << detail::hash_hex(config_hash) << "\n";
}

inline void write_trace(std::ostream& os, const SimulationTrace& t, std::uint64_t config_hash) {
    using detail::fmt;
    const size_t N = t.scenario.sessions.size();
    write_output_header(os, config_hash);
    os << "# flexibility simulation trace\n";
    os << "# method " << to_string(t.method) << "\n";
    os << "# gamma " << fmt(t.robust.gamma) << "\n";
    os << "# epsilon " << fmt(t.robust.epsilon) << "\n";
    os << "# window " << t.robust.window << "\n";
    os << "# horizon " << t.scenario.cfg.horizon << "\n";
    os << "# dt_h " << fmt(t.scenario.cfg.dt_h) << "\n";
    os << "# alpha " << fmt(t.scenario.cfg.alpha) << "\n";
    os << "# signal " << to_string(t.scenario.cfg.signal) << "\n";
    os << "# seed " << t.scenario.cfg.seed << "\n";
    os << "# n_ev " << N << "\n";
    for (size_t i = 0; i < N; ++i) {
        const SessionRecord& s = t.scenario.sessions[i];
        const EvParams& ev = t.scenario.params[i];
        os << "# ev " << s.ev_id << ' ' << (s.type.empty() ? "-" : s.type) << ' ' << s.arrival
           << ' ' << s.reported_departure << ' ' << s.actual_departure << ' '
           << fmt(s.arrival_soc_kwh) << ' ' << fmt(ev.p_ch_max_kw) << ' ' << fmt(ev.p_dis_max_kw)
           << ' ' << fmt(ev.e_max_kwh) << ' ' << fmt(ev.e_min_kwh) << ' ' << fmt(ev.eta_ch) << ' '
           << fmt(ev.eta_dis) << "\n";
    }
    os << "# columns: k ev_lo ev_hi cl_lo cl_hi signal realized clamped act_lo act_hi u present"
          " p[n_ev] soc[n_ev] est_lo[n_ev] est_hi[n_ev]\n";
    for (const IntervalRecord& r : t.intervals) {
        os << r.k << '\t' << fmt(r.evaluated.lower_kw) << '\t' << fmt(r.evaluated.upper_kw)
           << '\t' << fmt(r.cleared.lower_kw) << '\t' << fmt(r.cleared.upper_kw) << '\t'
           << fmt(r.signal_kw) << '\t' << fmt(r.realized_kw) << '\t' << (r.clamped ? 1 : 0)
           << '\t' << fmt(r.actual.lower_kw) << '\t' << fmt(r.actual.upper_kw) << '\t'
           << fmt(r.u);
        os << '\t';
        for (size_t i = 0; i < N; ++i) os << (r.present[i] ? '1' : '0');
        for (size_t i = 0; i < N; ++i) os << '\t' << fmt(r.p_kw[i]);
        for (size_t i = 0; i < N; ++i) os << '\t' << fmt(r.soc_end_kwh[i]);
        for (size_t i = 0; i < N; ++i) os << '\t' << fmt(r.soc_lo_kwh[i]);
        for (size_t i = 0; i < N; ++i) os << '\t' << fmt(r.soc_hi_kwh[i]);
        os << "\n";
    }
}

inline SimulationTrace read_trace(std::istream& in, const std::string& origin = "trace") {
    SimulationTrace t;
    std::string line;
    int lineno = 0;
    long n_ev = -1;
    auto fail = [&](const std::string& msg) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    auto to_d = [&](const std::string& s) {
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            fail("malformed number '" + s + "'");
            return 0.0;
        }
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ms(line.substr(1));
            std::string key;
            ms >> key;
            if (key == "method") {
                std::string v;
                ms >> v;
                t.method = parse_method(v);
            } else if (key == "gamma") {
                ms >> t.robust.gamma;
            } else if (key == "epsilon") {
                ms >> t.robust.epsilon;
            } else if (key == "window") {
                ms >> t.robust.window;
            } else if (key == "horizon") {
                ms >> t.scenario.cfg.horizon;
            } else if (key == "dt_h") {
                ms >> t.scenario.cfg.dt_h;
            } else if (key == "alpha") {
                ms >> t.scenario.cfg.alpha;
            } else if (key == "signal") {
                std::string v;
                ms >> v;
                t.scenario.cfg.signal = parse_signal_mode(v);
            } else if (key == "seed") {
                ms >> t.scenario.cfg.seed;
            } else if (key == "n_ev") {
                ms >> n_ev;
            } else if (key == "ev") {
                SessionRecord s;
                EvParams ev;
                if (!(ms >> s.ev_id >> s.type >> s.arrival >> s.reported_departure >>
                      s.actual_departure >> s.arrival_soc_kwh >> ev.p_ch_max_kw >>
                      ev.p_dis_max_kw >> ev.e_max_kwh >> ev.e_min_kwh >> ev.eta_ch >> ev.eta_dis))
                    fail("malformed ev line");
                t.scenario.sessions.push_back(std::move(s));
                t.scenario.params.push_back(ev);
            }
            continue;
        }
        if (n_ev < 0) n_ev = static_cast<long>(t.scenario.sessions.size());
        std::vector<std::string> cols;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, '\t')) cols.push_back(cell);
        const size_t want = 12 + 4 * static_cast<size_t>(n_ev);
        if (cols.size() != want)
            fail("expected " + std::to_string(want) + " columns, got " +
                 std::to_string(cols.size()));
        IntervalRecord r;
        r.k = static_cast<int>(to_d(cols[0]));
        r.evaluated = {to_d(cols[1]), to_d(cols[2])};
        r.cleared = {to_d(cols[3]), to_d(cols[4])};
        r.signal_kw = to_d(cols[5]);
        r.realized_kw = to_d(cols[6]);
        r.clamped = to_d(cols[7]) != 0.0;
        r.actual = {to_d(cols[8]), to_d(cols[9])};
        r.u = to_d(cols[10]);
        const std::string& bits = cols[11];
        if (bits.size() != static_cast<size_t>(n_ev)) fail("presence bitstring length mismatch");
        for (char c : bits) {
            if (c != '0' && c != '1') fail("presence bitstring must be 0/1");
            r.present.push_back(c == '1');
        }
        for (long i = 0; i < n_ev; ++i) r.p_kw.push_back(to_d(cols[12 + static_cast<size_t>(i)]));
        for (long i = 0; i < n_ev; ++i)
            r.soc_end_kwh.push_back(to_d(cols[12 + static_cast<size_t>(n_ev + i)]));
        for (long i = 0; i < n_ev; ++i)
            r.soc_lo_kwh.push_back(to_d(cols[12 + static_cast<size_t>(2 * n_ev + i)]));
        for (long i = 0; i < n_ev; ++i)
            r.soc_hi_kwh.push_back(to_d(cols[12 + static_cast<size_t>(3 * n_ev + i)]));
        t.intervals.push_back(std::move(r));
    }
    if (n_ev >= 0 && static_cast<long>(t.scenario.sessions.size()) != n_ev)
        throw DataError(origin + ": header announces " + std::to_string(n_ev) +
                        " EVs but lists " + std::to_string(t.scenario.sessions.size()));
    return t;
}

struct ScorecardRow {
    std::string label;
    double gamma = 1.0;
    Scorecard card;
};

inline void write_scorecard(std::ostream& os, const std::vector<ScorecardRow>& rows,
                            std::uint64_t config_hash) {
    write_output_header(os, config_hash);
    os << "# columns: method gamma ubc lbc oef_mw uef_mw config\n";
    const std::string hex = detail::hash_hex(config_hash);
    for (const ScorecardRow& r : rows)
        os << r.label << '\t' << detail::fmt(r.gamma) << '\t' << r.card.ubc << '\t' << r.card.lbc
           << '\t' << detail::fmt(r.card.oef_mw) << '\t' << detail::fmt(r.card.uef_mw) << '\t'
           << hex << "\n";
}

// Per-interval promised/cleared/actual series, one row per interval, for
// external plotting.
inline void write_band_series(std::ostream& os, const SimulationTrace& t,
                              std::uint64_t config_hash) {
    using detail::fmt;
    if (t.intervals.empty()) throw DataError("empty trace");
    write_output_header(os, config_hash);
    os << "# columns: k ev_lo ev_hi cl_lo cl_hi act_lo act_hi signal realized u\n";
    for (const IntervalRecord& r : t.intervals)
        os << r.k << '\t' << fmt(r.evaluated.lower_kw) << '\t' << fmt(r.evaluated.upper_kw)
           << '\t' << fmt(r.cleared.lower_kw) << '\t' << fmt(r.cleared.upper_kw) << '\t'
           << fmt(r.actual.lower_kw) << '\t' << fmt(r.actual.upper_kw) << '\t' << fmt(r.signal_kw)
           << '\t' << fmt(r.realized_kw) << '\t' << fmt(r.u) << "\n";
}

inline void write_scale_table(std::ostream& os, const std::vector<ScalePoint>& points,
                              std::uint64_t config_hash) {
    write_output_header(os, config_hash);
    os << "# columns: n_ev build_s solve_s vars constraints lp_iterations nodes lower_kw config\n";
    const std::string hex = detail::hash_hex(config_hash);
    for (const ScalePoint& p : points)
        os << p.n_ev << '\t' << detail::fmt(p.build_s) << '\t' << detail::fmt(p.solve_s) << '\t'
           << p.vars << '\t' << p.constraints << '\t' << p.lp_iterations << '\t' << p.nodes
           << '\t' << detail::fmt(p.lower_kw) << '\t' << hex << "\n";
}

}
