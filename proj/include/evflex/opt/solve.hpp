#pragma once

// Front end for optimizing a Model: converts to column form, dispatches to
// the built-in solver, verifies the returned point, and reports a compact
// outcome. Maximization is handled by negating the objective internally.

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../common.hpp"
#include "mip.hpp"
#include "model.hpp"
#include "simplex.hpp"

namespace evflex::opt {

enum class SolveStatus { optimal, infeasible, unbounded, limit_hit };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::limit_hit: return "limit_hit";
    }
    return "?";
}

struct SolverConfig {
    std::string backend = "builtin";
    double time_limit_s = 120.0;
    double feas_tol = 1e-6;
    double int_tol = 1e-5;
    double mip_gap = 1e-6;
    long node_limit = 50000;
    std::string export_lp_dir;  // when set, the model text is written here first
    // Optional model-aware rounding: maps a relaxed point (indexed by model
    // variable) onto an integer-feasible one, or returns false. Used by
    // branch-and-bound to seed incumbents; the result is feasibility-checked,
    // so a wrong repair costs time but never correctness.
    std::function<bool(std::vector<double>&)> repair;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::limit_hit;
    double objective = 0.0;
    std::vector<double> values;  // one per model variable, present iff optimal
    double solve_time_s = 0.0;
    long lp_iterations = 0;
    long nodes = 0;
};

// Feasibility check in model space: every constraint within tol of its sense,
// every variable within bounds, binaries integral.
inline bool check_solution(const Model& model, const std::vector<double>& values, double tol,
                           std::string* why = nullptr) {
    if (static_cast<int>(values.size()) != model.num_vars()) {
        if (why) *why = "value count mismatch";
        return false;
    }
    for (int j = 0; j < model.num_vars(); ++j) {
        const VarDef& v = model.var(j);
        const double scale = 1.0 + std::max(std::abs(v.lo) < kInf ? std::abs(v.lo) : 0.0,
                                            std::abs(v.hi) < kInf ? std::abs(v.hi) : 0.0);
        if (values[j] < v.lo - tol * scale || values[j] > v.hi + tol * scale) {
            if (why) *why = "variable '" + v.name + "' out of bounds";
            return false;
        }
        if (v.kind == VarKind::binary && std::abs(values[j] - std::round(values[j])) > 1e-4) {
            if (why) *why = "variable '" + v.name + "' not integral";
            return false;
        }
    }
    for (int r = 0; r < model.num_constraints(); ++r) {
        const double act = model.activity(r, values);
        const double rhs = model.row_rhs(r);
        const double t = tol * (1.0 + std::abs(rhs));
        const Sense s = model.row_sense(r);
        const bool ok = (s == Sense::le && act <= rhs + t) || (s == Sense::ge && act >= rhs - t) ||
                        (s == Sense::eq && std::abs(act - rhs) <= t);
        if (!ok) {
            if (why) {
                std::ostringstream os;
                os << "constraint '" << model.row_name(r) << "' violated: activity " << act
                   << " vs rhs " << rhs;
                *why = os.str();
            }
            return false;
        }
    }
    return true;
}

namespace detail {

inline LpProblem to_lp(const Model& model) {
    LpProblem P;
    P.m = model.num_constraints();
    P.n_struct = model.num_vars();
    const int n_total = P.n_struct + P.m;

    // Gather entries column-wise from the row storage.
    std::vector<int> colnnz(P.n_struct, 0);
    for (int r = 0; r < P.m; ++r)
        for (int k = model.row_begin(r); k < model.row_end(r); ++k) colnnz[model.entry_var(k)]++;
    P.col_start.assign(n_total + 1, 0);
    for (int j = 0; j < P.n_struct; ++j) P.col_start[j + 1] = P.col_start[j] + colnnz[j];
    for (int r = 0; r < P.m; ++r)
        P.col_start[P.n_struct + r + 1] = P.col_start[P.n_struct + r] + 1;
    P.col_row.resize(P.col_start[n_total]);
    P.col_val.resize(P.col_start[n_total]);
    std::vector<int> fill(P.col_start.begin(), P.col_start.end() - 1);
    for (int r = 0; r < P.m; ++r)
        for (int k = model.row_begin(r); k < model.row_end(r); ++k) {
            const int j = model.entry_var(k);
            P.col_row[fill[j]] = r;
            P.col_val[fill[j]] = model.entry_coef(k);
            ++fill[j];
        }

    const double sign = model.goal() == Goal::maximize ? -1.0 : 1.0;
    P.cost.assign(n_total, 0.0);
    for (int j = 0; j < P.n_struct; ++j) P.cost[j] = sign * model.objective()[j];
    P.lo.resize(n_total);
    P.hi.resize(n_total);
    for (int j = 0; j < P.n_struct; ++j) {
        P.lo[j] = model.var(j).lo;
        P.hi[j] = model.var(j).hi;
    }
    P.b.resize(P.m);
    for (int r = 0; r < P.m; ++r) {
        const int sc = P.n_struct + r;
        P.col_row[P.col_start[sc]] = r;
        P.col_val[P.col_start[sc]] = 1.0;
        P.b[r] = model.row_rhs(r);
        switch (model.row_sense(r)) {
            case Sense::le:
                P.lo[sc] = 0.0;
                P.hi[sc] = kInf;
                break;
            case Sense::ge:
                P.lo[sc] = -kInf;
                P.hi[sc] = 0.0;
                break;
            case Sense::eq:
                P.lo[sc] = 0.0;
                P.hi[sc] = 0.0;
                break;
        }
    }
    P.build_row_form();
    return P;
}

inline void export_model(const Model& model, const std::string& dir) {
    static std::atomic<long> counter{0};
    const long id = counter.fetch_add(1);
    std::string base = model.name();
    for (char& c : base)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    const std::string path = dir + "/" + base + "_" + std::to_string(id) + ".lp";
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write model export to '" + path + "'");
    model.write_lp(os);
}

}  // namespace detail

inline SolveOutcome solve(const Model& model, const SolverConfig& cfg = {}) {
    if (cfg.backend != "builtin")
        throw SolverError("backend unavailable: '" + cfg.backend + "' (available: builtin)");
    if (!cfg.export_lp_dir.empty()) detail::export_model(model, cfg.export_lp_dir);

    const auto t0 = std::chrono::steady_clock::now();
    detail::LpProblem P = detail::to_lp(model);

    detail::LpOptions lo;
    lo.feas_tol = std::min(1e-7, cfg.feas_tol);
    if (cfg.time_limit_s > 0) {
        lo.has_deadline = true;
        lo.deadline = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                               std::chrono::duration<double>(cfg.time_limit_s));
    }

    std::vector<int> icols;
    for (int j = 0; j < model.num_vars(); ++j)
        if (model.var(j).kind == VarKind::binary) icols.push_back(j);

    const double sign = model.goal() == Goal::maximize ? -1.0 : 1.0;
    SolveOutcome out;

    auto finish_time = [&] {
        out.solve_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    detail::LpStatus st;
    double obj = 0.0;
    std::vector<double> full;
    if (icols.empty()) {
        detail::BoundedSimplex s(P, lo);
        detail::LpResult r = s.run();
        st = r.status;
        obj = r.objective;
        full = std::move(r.x);
        out.lp_iterations = r.iterations;
        out.nodes = 0;
    } else {
        detail::MipOptions mo;
        mo.lp = lo;
        mo.int_tol = cfg.int_tol;
        mo.mip_gap = cfg.mip_gap;
        mo.node_limit = cfg.node_limit;
        mo.repair = cfg.repair;
        detail::BranchAndBound bb(P, icols, mo);
        detail::MipResult r = bb.run();
        st = r.status;
        obj = r.objective;
        full = std::move(r.x);
        out.lp_iterations = r.lp_iterations;
        out.nodes = r.nodes;
    }

    switch (st) {
        case detail::LpStatus::optimal: {
            out.status = SolveStatus::optimal;
            out.objective = sign * obj;
            out.values.assign(full.begin(), full.begin() + model.num_vars());
            for (int j : icols) out.values[j] = std::round(out.values[j]);
            std::string why;
            if (!check_solution(model, out.values, cfg.feas_tol, &why))
                throw SolverError("model '" + model.name() + "': solution rejected (" + why + ")");
            break;
        }
        case detail::LpStatus::infeasible:
            out.status = SolveStatus::infeasible;
            break;
        case detail::LpStatus::unbounded:
            out.status = SolveStatus::unbounded;
            break;
        case detail::LpStatus::limit:
            out.status = SolveStatus::limit_hit;
            break;
        case detail::LpStatus::numerical:
            throw SolverError("model '" + model.name() + "': numerical failure in solve");
    }
    finish_time();
    return out;
}

}
