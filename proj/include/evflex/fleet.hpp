#pragma once

// EV data model and the per-EV feasible operating region: charge/discharge
// split with mutual exclusion binaries and the one-interval energy update.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "log.hpp"
#include "opt/model.hpp"
#include "opt/solve.hpp"

namespace evflex {

struct EvParams {
    double p_ch_max_kw = 0.0;
    double p_dis_max_kw = 0.0;
    double e_max_kwh = 0.0;  // battery capacity
    double e_min_kwh = 0.0;  // capacity lower limit
    double eta_ch = 1.0;
    double eta_dis = 1.0;

    void validate(const std::string& who = "ev") const {
        if (!(p_ch_max_kw > 0.0) || !(p_dis_max_kw > 0.0))
            throw ConfigError(who + ": charge/discharge ratings must be positive");
        if (!(e_min_kwh >= 0.0) || !(e_min_kwh < e_max_kwh))
            throw ConfigError(who + ": need 0 <= min energy < capacity");
        if (!(eta_ch > 0.0 && eta_ch <= 1.0) || !(eta_dis > 0.0 && eta_dis <= 1.0))
            throw ConfigError(who + ": efficiencies must lie in (0, 1]");
    }
};

struct EvState {
    int ev_id = 0;
    double soc_kwh = 0.0;  // energy carried into the current interval
    bool connected = true;
    int reported_departure = 0;  // first interval the EV said it will be gone
    int actual_departure = 0;    // ground truth, hidden from evaluation
};

struct IntervalSpec {
    int index = 0;
    double dt_h = 1.0 / 12.0;
};

struct FlexibilityBand {
    double lower_kw = 0.0;
    double upper_kw = 0.0;
    double width() const { return upper_kw - lower_kw; }
};

struct PhiHandles {
    opt::VarId p, p_ch, p_dis, z_ch, z_dis, e;
};

// Adds one EV's single-interval operating constraints to the model:
//   0 <= p_ch <= cap * z_ch, 0 <= p_dis <= cap * z_dis, z_ch + z_dis <= 1,
//   p = p_ch - p_dis, E = e_prev + eta_ch*p_ch*dt - p_dis*dt/eta_dis,
//   e_min <= E <= e_max.
inline PhiHandles build_phi(opt::Model& model, const EvParams& ev, double e_prev_kwh, double dt_h,
                            const std::string& tag) {
    ev.validate(tag);
    if (!(dt_h > 0.0)) throw ConfigError(tag + ": interval duration must be positive");
    if (e_prev_kwh < ev.e_min_kwh - 1e-9 || e_prev_kwh > ev.e_max_kwh + 1e-9)
        throw ConfigError(tag + ": starting energy " + std::to_string(e_prev_kwh) +
                          " outside [" + std::to_string(ev.e_min_kwh) + ", " +
                          std::to_string(ev.e_max_kwh) + "]");
    using opt::Sense;
    using opt::VarKind;
    // attainable net-power extremes this interval: rate caps meet energy limits;
    // using them (instead of the raw ratings) as the indicator big-M keeps the
    // relaxation integral at the extremes, which branch-and-bound rewards
    const double p_lo = std::min(
        0.0, std::max(-ev.p_dis_max_kw, -(e_prev_kwh - ev.e_min_kwh) * ev.eta_dis / dt_h));
    const double p_hi = std::max(
        0.0, std::min(ev.p_ch_max_kw, (ev.e_max_kwh - e_prev_kwh) / (ev.eta_ch * dt_h)));
    PhiHandles h;
    h.p = model.add_var({tag + ".p", VarKind::continuous, -ev.p_dis_max_kw, ev.p_ch_max_kw});
    h.p_ch = model.add_var({tag + ".pch", VarKind::continuous, 0.0, p_hi});
    h.p_dis = model.add_var({tag + ".pdis", VarKind::continuous, 0.0, -p_lo});
    h.z_ch = model.add_var({tag + ".zch", VarKind::binary, 0.0, p_hi > 0.0 ? 1.0 : 0.0});
    h.z_dis = model.add_var({tag + ".zdis", VarKind::binary, 0.0, p_lo < 0.0 ? 1.0 : 0.0});
    h.e = model.add_var({tag + ".e", VarKind::continuous, ev.e_min_kwh, ev.e_max_kwh});
    model.add_constraint({{h.p_ch, 1.0}, {h.z_ch, -p_hi}}, Sense::le, 0.0, tag + ".chcap");
    model.add_constraint({{h.p_dis, 1.0}, {h.z_dis, p_lo}}, Sense::le, 0.0, tag + ".discap");
    model.add_constraint({{h.z_ch, 1.0}, {h.z_dis, 1.0}}, Sense::le, 1.0, tag + ".zsum");
    model.add_constraint({{h.p, 1.0}, {h.p_ch, -1.0}, {h.p_dis, 1.0}}, Sense::eq, 0.0,
                         tag + ".pdef");
    model.add_constraint(
        {{h.e, 1.0}, {h.p_ch, -ev.eta_ch * dt_h}, {h.p_dis, dt_h / ev.eta_dis}}, Sense::eq,
        e_prev_kwh, tag + ".edef");
    // The end energy as a function of net power is concave (a kW of discharge
    // costs 1/eta_dis, a kW of charge only stores eta_ch), so the chord through
    // the two attainable extremes is valid for every charge-xor-discharge
    // point. It removes the relaxation's incentive to run both directions at
    // once, which otherwise leaves branch-and-bound a gap on every vehicle.
    if (p_hi - p_lo > 1e-9) {
        const double e_lo = e_prev_kwh + p_lo * dt_h / ev.eta_dis;
        const double e_hi = e_prev_kwh + ev.eta_ch * p_hi * dt_h;
        const double slope = (e_hi - e_lo) / (p_hi - p_lo);
        model.add_constraint({{h.e, 1.0}, {h.p, -slope}}, Sense::ge, e_lo - slope * p_lo,
                             tag + ".hull");
    }
    return h;
}

// One-interval energy update for a realized net power.
inline double roll_soc(const EvParams& ev, double e_prev_kwh, double p_kw, double dt_h) {
    double e = p_kw >= 0.0 ? e_prev_kwh + ev.eta_ch * p_kw * dt_h
                           : e_prev_kwh + p_kw * dt_h / ev.eta_dis;
    if (e < ev.e_min_kwh || e > ev.e_max_kwh) {
        const double over = std::max(ev.e_min_kwh - e, e - ev.e_max_kwh);
        if (over > 1e-5)
            log(LogLevel::warn, "soc update clamped by " + std::to_string(over) + " kWh");
        e = std::min(std::max(e, ev.e_min_kwh), ev.e_max_kwh);
    }
    return e;
}

namespace detail {

// Per-EV data for projecting a relaxed operating point onto its pure
// charge-xor-discharge form while holding net power fixed.
struct PhiRepairSpec {
    PhiHandles h;
    double e_prev_kwh, dt_h, eta_ch, eta_dis, e_min_kwh, e_max_kwh, p_lo_kw, p_hi_kw;
};

inline PhiRepairSpec make_repair_spec(const PhiHandles& h, const EvParams& ev, double e_prev_kwh,
                                      double dt_h) {
    PhiRepairSpec s{h, e_prev_kwh, dt_h, ev.eta_ch, ev.eta_dis, ev.e_min_kwh, ev.e_max_kwh, 0, 0};
    s.p_lo_kw = std::min(0.0, std::max(-ev.p_dis_max_kw,
                                       -(e_prev_kwh - ev.e_min_kwh) * ev.eta_dis / dt_h));
    s.p_hi_kw = std::max(
        0.0, std::min(ev.p_ch_max_kw, (ev.e_max_kwh - e_prev_kwh) / (ev.eta_ch * dt_h)));
    return s;
}

// Relaxation optima can run charge and discharge simultaneously (the only way
// the indicators go fractional); re-splitting each net power into its pure
// mode keeps every coupling row exact and only raises the end energy. The
// hull row keeps relaxed net powers attainable, so the projection lands
// inside the battery limits.
inline bool repair_phi_point(const std::vector<PhiRepairSpec>& evs, std::vector<double>& x) {
    for (const PhiRepairSpec& s : evs) {
        const double p = x[s.h.p];
        if (p < s.p_lo_kw - 1e-5 || p > s.p_hi_kw + 1e-5) return false;
        const bool ch = p >= 0.0;
        x[s.h.p_ch] = ch ? p : 0.0;
        x[s.h.p_dis] = ch ? 0.0 : -p;
        x[s.h.z_ch] = p > 1e-9 ? 1.0 : 0.0;
        x[s.h.z_dis] = p < -1e-9 ? 1.0 : 0.0;
        const double e = ch ? s.e_prev_kwh + s.eta_ch * p * s.dt_h
                            : s.e_prev_kwh + p * s.dt_h / s.eta_dis;
        x[s.h.e] = std::min(std::max(e, s.e_min_kwh), s.e_max_kwh);
    }
    return true;
}

inline void attach_phi_repair(opt::SolverConfig& scfg, std::vector<PhiRepairSpec> specs) {
    scfg.repair = [specs = std::move(specs)](std::vector<double>& x) {
        return repair_phi_point(specs, x);
    };
}

}

// Aggregate one-interval power range of a fleet: min and max of total p over
// every EV's operating region. Separable, but solved as one model because the
// callers downstream add coupling rows to the same structure.
inline FlexibilityBand fleet_band(const std::vector<std::pair<EvParams, double>>& fleet,
                                  double dt_h, const opt::SolverConfig& scfg_in = {}) {
    if (fleet.empty()) return {0.0, 0.0};
    opt::Model model("fleet_band");
    std::vector<opt::LinTerm> total;
    std::vector<detail::PhiRepairSpec> specs;
    for (size_t i = 0; i < fleet.size(); ++i) {
        PhiHandles h =
            build_phi(model, fleet[i].first, fleet[i].second, dt_h, "ev" + std::to_string(i));
        total.push_back({h.p, 1.0});
        specs.push_back(detail::make_repair_spec(h, fleet[i].first, fleet[i].second, dt_h));
    }
    opt::SolverConfig scfg = scfg_in;
    detail::attach_phi_repair(scfg, std::move(specs));
    FlexibilityBand band;
    model.set_objective(std::span<const opt::LinTerm>(total), opt::Goal::minimize);
    opt::SolveOutcome lo = opt::solve(model, scfg);
    if (lo.status != opt::SolveStatus::optimal)
        throw SolverError("fleet_band lower solve: " + std::string(opt::to_string(lo.status)));
    band.lower_kw = lo.objective;
    model.set_objective(std::span<const opt::LinTerm>(total), opt::Goal::maximize);
    opt::SolveOutcome hi = opt::solve(model, scfg);
    if (hi.status != opt::SolveStatus::optimal)
        throw SolverError("fleet_band upper solve: " + std::string(opt::to_string(hi.status)));
    band.upper_kw = hi.objective;
    return band;
}

struct FleetType {
    std::string name;
    EvParams params;
    int count = 0;
};

struct FleetSpec {
    std::vector<FleetType> types;

    std::vector<EvParams> expand() const {
        std::vector<EvParams> out;
        for (const FleetType& t : types)
            for (int i = 0; i < t.count; ++i) out.push_back(t.params);
        return out;
    }
    int total_count() const {
        int n = 0;
        for (const FleetType& t : types) n += t.count;
        return n;
    }
};

// Fleet definition text: blocks started by "type <name>", followed by
// key/value lines (rated_power_kw, capacity_kwh, min_energy_kwh, efficiency,
// count). '#' comments and blank lines ignored.
inline FleetSpec parse_fleet(std::istream& in, const std::string& origin = "fleet") {
    FleetSpec spec;
    FleetType* cur = nullptr;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "type") {
            std::string name;
            if (!(ls >> name)) fail("type needs a name");
            for (const FleetType& t : spec.types)
                if (t.name == name) fail("duplicate type '" + name + "'");
            spec.types.push_back({name, {}, 0});
            cur = &spec.types.back();
            continue;
        }
        if (!cur) fail("'" + key + "' before any 'type' block");
        double val = 0.0;
        if (!(ls >> val)) fail("'" + key + "' needs a numeric value");
        std::string extra;
        if (ls >> extra) fail("trailing content after '" + key + "'");
        if (key == "rated_power_kw") {
            cur->params.p_ch_max_kw = val;
            cur->params.p_dis_max_kw = val;
        } else if (key == "charge_power_kw") {
            cur->params.p_ch_max_kw = val;
        } else if (key == "discharge_power_kw") {
            cur->params.p_dis_max_kw = val;
        } else if (key == "capacity_kwh") {
            cur->params.e_max_kwh = val;
        } else if (key == "min_energy_kwh") {
            cur->params.e_min_kwh = val;
        } else if (key == "efficiency") {
            cur->params.eta_ch = val;
            cur->params.eta_dis = val;
        } else if (key == "charge_efficiency") {
            cur->params.eta_ch = val;
        } else if (key == "discharge_efficiency") {
            cur->params.eta_dis = val;
        } else if (key == "count") {
            if (val < 1 || val != std::floor(val)) fail("count must be a positive integer");
            cur->count = static_cast<int>(val);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (spec.types.empty()) throw DataError(origin + ": no EV type blocks found");
    for (const FleetType& t : spec.types) {
        if (t.count <= 0) throw DataError(origin + ": type '" + t.name + "' has no count");
        t.params.validate(origin + ": type '" + t.name + "'");
    }
    return spec;
}

inline FleetSpec load_fleet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fleet file '" + path + "'");
    return parse_fleet(in, path);
}

}
