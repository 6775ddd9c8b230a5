#pragma once
// Flexibility evaluation for the next interval. Four methods share one input
// bundle: per-EV SOC intervals, a transport-distance ambiguity set over the
// departure ratio u, and a deviation budget gamma. Method 4 solves the full
// robust dual model; methods 1-3 are restrictions of it.

#include <string>
#include <utility>
#include <vector>

#include <evflex/departure.hpp>
#include <evflex/fleet.hpp>
#include <evflex/soc_band.hpp>

namespace evflex {

struct RobustConfig {
    double gamma = 1.0;    // share of the SOC half-width protected against, in [0, 1]
    double epsilon = 0.0;  // transport radius used when building ambiguity sets
    int window = 20;       // sample window length S used when building ambiguity sets

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw ConfigError("gamma must lie in [0, 1], got " + std::to_string(gamma));
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
            throw ConfigError("epsilon must be finite and nonnegative");
        if (window < 1) throw ConfigError("sample window must be at least 1");
    }
};

// Everything an evaluation method may look at. Ground-truth simulator state
// (actual departures, realized signals) deliberately has no field here.
struct EvalInputs {
    std::vector<EvParams> fleet;      // members expected connected next interval
    std::vector<SocInterval> socs;    // one per fleet entry, same order
    AmbiguitySet ambiguity;           // departure-ratio ambiguity; radius taken from here
    double dt_h = 1.0 / 12.0;

    void validate() const {
        if (socs.size() != fleet.size())
            throw ConfigError("evaluation inputs need one SOC interval per EV (" +
                              std::to_string(fleet.size()) + " EVs, " +
                              std::to_string(socs.size()) + " intervals)");
        if (!(dt_h > 0.0)) throw ConfigError("interval duration must be positive");
        for (size_t i = 0; i < fleet.size(); ++i) {
            fleet[i].validate();
            const SocInterval& s = socs[i];
            if (!std::isfinite(s.e_lo_kwh) || !std::isfinite(s.e_hi_kwh) ||
                s.e_lo_kwh > s.e_hi_kwh + 1e-9)
                throw ConfigError("SOC interval for ev " + std::to_string(s.ev_id) +
                                  " is not an ordered finite pair");
            if (s.e_lo_kwh < fleet[i].e_min_kwh - 1e-6 ||
                s.e_hi_kwh > fleet[i].e_max_kwh + 1e-6)
                throw ConfigError("SOC interval for ev " + std::to_string(s.ev_id) +
                                  " leaves the battery limits");
        }
    }
};

namespace detail {

// Variable handles into the robust band model, for tests that pin dispatch
// decisions or inspect the dual block.
struct DroHandles {
    std::vector<opt::VarId> p, p_ch, p_dis, z_ch, z_dis;
    std::vector<opt::VarId> q1, q2, zz1, zz2;  // per-EV budget auxiliaries
    opt::VarId y1 = -1, y2 = -1;
    opt::VarId agg = -1;  // a = sum of p
    opt::VarId eta = -1;  // transport dual norm variable
    std::vector<opt::VarId> tau_lo, tau_hi;  // support multipliers per sample
    std::vector<opt::VarId> beta;            // per-sample epigraph variable
};

// Builds the dual of one band side. `upper` false: minimize the worst-case
// expected aggregate (lower band); true: maximize the best-case one. The SOC
// carried into the interval is only known to lie in [e_lo, e_hi]; the model
// protects gamma of the half-width via the q/Z/y auxiliaries, and the
// departure ratio u enters through the per-sample transport dual block.
inline opt::Model build_dro_model(const EvalInputs& in, const RobustConfig& cfg, bool upper,
                                  DroHandles* hout = nullptr) {
    in.validate();
    cfg.validate();
    const AmbiguitySet& amb = in.ambiguity;
    if (amb.samples.empty())
        throw ConfigError("ambiguity set needs at least one sample (no fallback invented)");
    if (!(amb.epsilon >= 0.0) || !std::isfinite(amb.epsilon))
        throw ConfigError("ambiguity radius must be finite and nonnegative");
    if (!(amb.u_lo <= amb.u_hi))
        throw ConfigError("ambiguity support is inverted");
    for (double u : amb.samples)
        if (u < amb.u_lo - 1e-9 || u > amb.u_hi + 1e-9)
            throw ConfigError("ambiguity sample " + std::to_string(u) +
                              " lies outside the declared support");

    const int n_ev = static_cast<int>(in.fleet.size());
    const int n_s = static_cast<int>(amb.samples.size());
    const double dt = in.dt_h;
    opt::Model m(upper ? "band_upper" : "band_lower");
    DroHandles h;

    // Worst-protected charge/discharge room per EV. Using it as the indicator
    // big-M (instead of the raw rating) keeps the relaxation integral at the
    // extremes; the SOC rows below still carry the exact budgeted coupling.
    std::vector<double> eff_ch(static_cast<size_t>(n_ev)), eff_dis(static_cast<size_t>(n_ev));
    const double gprot = std::min(1.0, cfg.gamma);
    for (int n = 0; n < n_ev; ++n) {
        const EvParams& ev = in.fleet[n];
        const SocInterval& s = in.socs[n];
        eff_ch[n] = std::max(
            0.0, std::min(ev.p_ch_max_kw, (ev.e_max_kwh - (s.mid() + gprot * s.half_width())) /
                                              (ev.eta_ch * dt)));
        eff_dis[n] = std::max(
            0.0, std::min(ev.p_dis_max_kw,
                          ((s.mid() - gprot * s.half_width()) - ev.e_min_kwh) * ev.eta_dis / dt));
    }
    for (int n = 0; n < n_ev; ++n) {
        const std::string tag = "ev" + std::to_string(n);
        h.p.push_back(
            m.add_var({tag + ".p", opt::VarKind::continuous, -eff_dis[n], eff_ch[n]}));
        h.p_ch.push_back(m.add_var({tag + ".pch", opt::VarKind::continuous, 0.0, eff_ch[n]}));
        h.p_dis.push_back(m.add_var({tag + ".pdis", opt::VarKind::continuous, 0.0, eff_dis[n]}));
        h.z_ch.push_back(
            m.add_var({tag + ".zch", opt::VarKind::binary, 0.0, eff_ch[n] > 0.0 ? 1.0 : 0.0}));
        h.z_dis.push_back(
            m.add_var({tag + ".zdis", opt::VarKind::binary, 0.0, eff_dis[n] > 0.0 ? 1.0 : 0.0}));
        h.q1.push_back(m.add_var({tag + ".q1"}));
        h.q2.push_back(m.add_var({tag + ".q2"}));
        h.zz1.push_back(m.add_var({tag + ".Z1"}));
        h.zz2.push_back(m.add_var({tag + ".Z2"}));
    }
    h.y1 = m.add_var({"y1", opt::VarKind::continuous, 1.0, opt::kInf});
    h.y2 = m.add_var({"y2", opt::VarKind::continuous, 1.0, opt::kInf});
    h.agg = m.add_var({"a", opt::VarKind::continuous, -opt::kInf, opt::kInf});
    h.eta = m.add_var({"eta", opt::VarKind::continuous, 0.0, opt::kInf});
    for (int i = 0; i < n_s; ++i) {
        const std::string tag = "s" + std::to_string(i);
        h.tau_lo.push_back(m.add_var({tag + ".tlo"}));
        h.tau_hi.push_back(m.add_var({tag + ".thi"}));
        h.beta.push_back(
            m.add_var({tag + ".beta", opt::VarKind::continuous, -opt::kInf, opt::kInf}));
    }

    std::vector<opt::LinTerm> couple{{h.agg, 1.0}};
    for (int n = 0; n < n_ev; ++n) {
        const EvParams& ev = in.fleet[n];
        const SocInterval& s = in.socs[n];
        const std::string tag = "ev" + std::to_string(n);
        const double mid = s.mid();
        const double half = s.half_width();
        m.add_constraint({{h.p_ch[n], 1.0}, {h.z_ch[n], -eff_ch[n]}}, opt::Sense::le, 0.0,
                         tag + ".chcap");
        m.add_constraint({{h.p_dis[n], 1.0}, {h.z_dis[n], -eff_dis[n]}}, opt::Sense::le, 0.0,
                         tag + ".discap");
        m.add_constraint({{h.z_ch[n], 1.0}, {h.z_dis[n], 1.0}}, opt::Sense::le, 1.0,
                         tag + ".zsum");
        m.add_constraint({{h.p[n], 1.0}, {h.p_ch[n], -1.0}, {h.p_dis[n], 1.0}}, opt::Sense::eq,
                         0.0, tag + ".pdef");
        // carried SOC may sit gamma*half below the midpoint: discharge room
        m.add_constraint({{h.p_ch[n], -ev.eta_ch * dt},
                          {h.p_dis[n], dt / ev.eta_dis},
                          {h.q1[n], 1.0},
                          {h.zz1[n], cfg.gamma}},
                         opt::Sense::le, mid - ev.e_min_kwh, tag + ".soclo");
        // ... or gamma*half above it: charge room
        m.add_constraint({{h.p_ch[n], ev.eta_ch * dt},
                          {h.p_dis[n], -dt / ev.eta_dis},
                          {h.q2[n], 1.0},
                          {h.zz2[n], cfg.gamma}},
                         opt::Sense::le, ev.e_max_kwh - mid, tag + ".sochi");
        m.add_constraint({{h.zz1[n], 1.0}, {h.q1[n], 1.0}, {h.y1, -half}}, opt::Sense::ge, 0.0,
                         tag + ".prot1");
        m.add_constraint({{h.zz2[n], 1.0}, {h.q2[n], 1.0}, {h.y2, -half}}, opt::Sense::ge, 0.0,
                         tag + ".prot2");
        couple.push_back({h.p[n], -1.0});
    }
    m.add_constraint(std::span<const opt::LinTerm>(couple), opt::Sense::eq, 0.0, "agg");

    std::vector<opt::LinTerm> obj;
    obj.push_back({h.eta, upper ? -amb.epsilon : amb.epsilon});
    for (int i = 0; i < n_s; ++i) {
        const double u = amb.samples[i];
        const double slack_lo = u - amb.u_lo;   // room below the sample
        const double slack_hi = amb.u_hi - u;   // room above it
        const std::string tag = "s" + std::to_string(i);
        if (!upper) {
            // epigraph of sup_u' { a u' - eta |u' - u| } over the support
            m.add_constraint({{h.agg, u},
                              {h.tau_lo[i], slack_lo},
                              {h.tau_hi[i], slack_hi},
                              {h.beta[i], -1.0}},
                             opt::Sense::le, 0.0, tag + ".val");
            m.add_constraint(
                {{h.tau_lo[i], -1.0}, {h.tau_hi[i], 1.0}, {h.agg, -1.0}, {h.eta, -1.0}},
                opt::Sense::le, 0.0, tag + ".nrm_a");
            m.add_constraint(
                {{h.tau_lo[i], 1.0}, {h.tau_hi[i], -1.0}, {h.agg, 1.0}, {h.eta, -1.0}},
                opt::Sense::le, 0.0, tag + ".nrm_b");
        } else {
            // hypograph of inf_u' { a u' + eta |u' - u| } over the support
            m.add_constraint({{h.agg, u},
                              {h.tau_lo[i], -slack_lo},
                              {h.tau_hi[i], -slack_hi},
                              {h.beta[i], -1.0}},
                             opt::Sense::ge, 0.0, tag + ".val");
            m.add_constraint(
                {{h.tau_lo[i], -1.0}, {h.tau_hi[i], 1.0}, {h.agg, 1.0}, {h.eta, -1.0}},
                opt::Sense::le, 0.0, tag + ".nrm_a");
            m.add_constraint(
                {{h.tau_lo[i], 1.0}, {h.tau_hi[i], -1.0}, {h.agg, -1.0}, {h.eta, -1.0}},
                opt::Sense::le, 0.0, tag + ".nrm_b");
        }
        obj.push_back({h.beta[i], 1.0 / n_s});
    }
    m.set_objective(std::span<const opt::LinTerm>(obj),
                    upper ? opt::Goal::maximize : opt::Goal::minimize);
    if (hout) *hout = std::move(h);
    return m;
}

}  // namespace detail

struct RobustEvaluation {
    double power_kw = 0.0;
    opt::SolveOutcome outcome;
};

inline RobustEvaluation evaluate_m4_lower(const EvalInputs& in, const RobustConfig& cfg,
                                          const opt::SolverConfig& scfg = {}) {
    if (in.fleet.empty()) {
        in.validate();
        cfg.validate();
        return {0.0, {opt::SolveStatus::optimal, 0.0, {}, 0.0, 0, 0}};
    }
    opt::Model m = detail::build_dro_model(in, cfg, false);
    opt::SolveOutcome out = opt::solve(m, scfg);
    if (out.status != opt::SolveStatus::optimal)
        throw SolverError("lower band solve: " + std::string(opt::to_string(out.status)));
    return {out.objective, std::move(out)};
}

inline RobustEvaluation evaluate_m4_upper(const EvalInputs& in, const RobustConfig& cfg,
                                          const opt::SolverConfig& scfg = {}) {
    if (in.fleet.empty()) {
        in.validate();
        cfg.validate();
        return {0.0, {opt::SolveStatus::optimal, 0.0, {}, 0.0, 0, 0}};
    }
    opt::Model m = detail::build_dro_model(in, cfg, true);
    opt::SolveOutcome out = opt::solve(m, scfg);
    if (out.status != opt::SolveStatus::optimal)
        throw SolverError("upper band solve: " + std::string(opt::to_string(out.status)));
    return {out.objective, std::move(out)};
}

// M4: full model, SOC intervals + departure ambiguity + budget.
inline FlexibilityBand evaluate_m4(const EvalInputs& in, const RobustConfig& cfg,
                                   const opt::SolverConfig& scfg = {}) {
    return {evaluate_m4_lower(in, cfg, scfg).power_kw, evaluate_m4_upper(in, cfg, scfg).power_kw};
}

// M1: departure ambiguity only; SOC intervals collapse to their midpoints.
inline FlexibilityBand evaluate_m1(const EvalInputs& in, const RobustConfig& cfg,
                                   const opt::SolverConfig& scfg = {}) {
    EvalInputs point = in;
    for (SocInterval& s : point.socs) {
        const double mid = s.mid();
        s.e_lo_kwh = s.e_hi_kwh = mid;
    }
    return evaluate_m4(point, cfg, scfg);
}

// M2: SOC intervals only; departures pinned to u = 1.
inline FlexibilityBand evaluate_m2(const EvalInputs& in, const RobustConfig& cfg,
                                   const opt::SolverConfig& scfg = {}) {
    EvalInputs sure = in;
    sure.ambiguity = AmbiguitySet{{1.0}, 0.0, 1.0, 1.0};
    return evaluate_m4(sure, cfg, scfg);
}

// M3: no uncertainty at all; plain fleet range at midpoint SOC.
inline FlexibilityBand evaluate_m3(const EvalInputs& in, const opt::SolverConfig& scfg = {}) {
    in.validate();
    std::vector<std::pair<EvParams, double>> fleet;
    fleet.reserve(in.fleet.size());
    for (size_t i = 0; i < in.fleet.size(); ++i) fleet.push_back({in.fleet[i], in.socs[i].mid()});
    return fleet_band(fleet, in.dt_h, scfg);
}

enum class Method { m1, m2, m3, m4 };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::m1: return "M1";
        case Method::m2: return "M2";
        case Method::m3: return "M3";
        case Method::m4: return "M4";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "M1" || s == "m1") return Method::m1;
    if (s == "M2" || s == "m2") return Method::m2;
    if (s == "M3" || s == "m3") return Method::m3;
    if (s == "M4" || s == "m4") return Method::m4;
    throw ConfigError("unknown method '" + s + "' (expected M1..M4)");
}

inline FlexibilityBand evaluate(Method method, const EvalInputs& in, const RobustConfig& cfg,
                                const opt::SolverConfig& scfg = {}) {
    switch (method) {
        case Method::m1: return evaluate_m1(in, cfg, scfg);
        case Method::m2: return evaluate_m2(in, cfg, scfg);
        case Method::m3: return evaluate_m3(in, scfg);
        case Method::m4: return evaluate_m4(in, cfg, scfg);
    }
    throw ConfigError("unknown method");
}

}  // namespace evflex
