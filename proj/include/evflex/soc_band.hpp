#pragma once

// Per-EV SOC uncertainty intervals at the regulation-stage boundary: the
// fleet tracks the worst admissible aggregate excursion to either edge of the
// cleared band, and each EV's energy at those two optima brackets its
// reachable SOC.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "fleet.hpp"

namespace evflex {

struct SocInterval {
    int ev_id = 0;
    double e_lo_kwh = 0.0;
    double e_hi_kwh = 0.0;
    double mid() const { return 0.5 * (e_lo_kwh + e_hi_kwh); }
    double half_width() const { return 0.5 * (e_hi_kwh - e_lo_kwh); }
};

struct ClearedBand {
    int interval = 0;
    double p_lo_kw = 0.0;
    double p_hi_kw = 0.0;
};

enum class ClampPolicy { error, clamp };

struct SocEstimate {
    std::vector<SocInterval> intervals;  // per-EV, endpoints ordered
    double agg_low_kwh = 0.0;            // optimum of the minimizing solve
    double agg_high_kwh = 0.0;           // optimum of the maximizing solve
    double agg_width() const { return agg_high_kwh - agg_low_kwh; }
};

namespace detail {

// min or max of total energy subject to the coupled target power. Returns
// each EV's energy at the optimum plus the aggregate.
inline std::vector<double> extreme_energy(const std::vector<std::pair<EvParams, double>>& fleet,
                                          double target_kw, double dt_h, bool minimize,
                                          const opt::SolverConfig& scfg_in) {
    opt::Model model(minimize ? "soc_low" : "soc_high");
    std::vector<opt::LinTerm> coupling, energy;
    std::vector<opt::VarId> evar;
    std::vector<PhiRepairSpec> specs;
    for (size_t i = 0; i < fleet.size(); ++i) {
        PhiHandles h =
            build_phi(model, fleet[i].first, fleet[i].second, dt_h, "ev" + std::to_string(i));
        coupling.push_back({h.p, 1.0});
        energy.push_back({h.e, 1.0});
        evar.push_back(h.e);
        specs.push_back(make_repair_spec(h, fleet[i].first, fleet[i].second, dt_h));
    }
    model.add_constraint(std::span<const opt::LinTerm>(coupling), opt::Sense::eq, target_kw,
                         "total_power");
    model.set_objective(std::span<const opt::LinTerm>(energy),
                        minimize ? opt::Goal::minimize : opt::Goal::maximize);
    opt::SolverConfig scfg = scfg_in;
    attach_phi_repair(scfg, std::move(specs));
    opt::SolveOutcome out = opt::solve(model, scfg);
    if (out.status != opt::SolveStatus::optimal)
        throw SolverError(std::string("soc interval solve (") + (minimize ? "low" : "high") +
                          ") at target " + std::to_string(target_kw) + " kW: " +
                          opt::to_string(out.status));
    std::vector<double> e(fleet.size());
    for (size_t i = 0; i < fleet.size(); ++i) e[i] = out.values[evar[i]];
    return e;
}

}  // namespace detail

// Both extreme-case solves for one cleared band. The cleared edges are
// clamped to the currently feasible fleet band first (policy-controlled);
// after unexpected departures the cleared band can exceed what the remaining
// fleet can actually do.
inline SocEstimate estimate_soc_intervals(
    const std::vector<std::pair<EvParams, double>>& fleet, const ClearedBand& cleared,
    double dt_h, ClampPolicy policy = ClampPolicy::clamp, const opt::SolverConfig& scfg = {}) {
    if (cleared.p_lo_kw > cleared.p_hi_kw)
        throw ConfigError("cleared band is inverted: [" + std::to_string(cleared.p_lo_kw) + ", " +
                          std::to_string(cleared.p_hi_kw) + "]");
    if (fleet.empty()) return {};
    FlexibilityBand feasible = fleet_band(fleet, dt_h, scfg);
    double lo = cleared.p_lo_kw, hi = cleared.p_hi_kw;
    if (lo < feasible.lower_kw - 1e-9 || hi > feasible.upper_kw + 1e-9) {
        if (policy == ClampPolicy::error)
            throw DataError("cleared band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                            "] exceeds feasible fleet band [" +
                            std::to_string(feasible.lower_kw) + ", " +
                            std::to_string(feasible.upper_kw) + "]");
        log(LogLevel::warn,
            "cleared band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                "] clamped to feasible [" + std::to_string(feasible.lower_kw) + ", " +
                std::to_string(feasible.upper_kw) + "]");
    }
    lo = std::clamp(lo, feasible.lower_kw, feasible.upper_kw);
    hi = std::clamp(hi, feasible.lower_kw, feasible.upper_kw);

    std::vector<double> e_min = detail::extreme_energy(fleet, lo, dt_h, true, scfg);
    std::vector<double> e_max = detail::extreme_energy(fleet, hi, dt_h, false, scfg);
    SocEstimate out;
    out.intervals.resize(fleet.size());
    for (size_t i = 0; i < fleet.size(); ++i) {
        // The two solves can cross per EV (the optimizer may move energy
        // between vehicles); ordering keeps every interval valid while the
        // per-EV midpoint and half-width are unchanged. The aggregates keep
        // the raw solve optima.
        const double a = e_min[i], b = e_max[i];
        out.intervals[i].ev_id = static_cast<int>(i);
        out.intervals[i].e_lo_kwh = std::min(a, b);
        out.intervals[i].e_hi_kwh = std::max(a, b);
        out.agg_low_kwh += a;
        out.agg_high_kwh += b;
    }
    return out;
}

inline double aggregate_low(const std::vector<SocInterval>& xs) {
    double s = 0.0;
    for (const SocInterval& x : xs) s += x.e_lo_kwh;
    return s;
}

inline double aggregate_high(const std::vector<SocInterval>& xs) {
    double s = 0.0;
    for (const SocInterval& x : xs) s += x.e_hi_kwh;
    return s;
}

inline double aggregate_width(const std::vector<SocInterval>& xs) {
    return aggregate_high(xs) - aggregate_low(xs);
}

}
