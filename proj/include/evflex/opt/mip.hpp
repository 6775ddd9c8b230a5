#pragma once

// Branch and bound over the bounded simplex. Best-bound node order,
// most-fractional branching, rounding and diving heuristics to find
// incumbents early. Binary variables only, which is all the models here use.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "simplex.hpp"

namespace evflex::opt::detail {

struct MipOptions {
    LpOptions lp;
    double int_tol = 1e-5;
    double mip_gap = 1e-6;
    long node_limit = 50000;
    int dive_rounds = 40;
    // Model-aware projection of a relaxed point onto an integer-feasible one
    // (structural values only; slacks are recomputed). Mutates in place and
    // returns false when the point is beyond saving. A good repair hands the
    // search its incumbent at the root and spares the diving heuristics.
    std::function<bool(std::vector<double>&)> repair;
};

struct MipResult {
    LpStatus status = LpStatus::numerical;
    double objective = 0.0;
    std::vector<double> x;
    long nodes = 0;
    long lp_iterations = 0;
};

class BranchAndBound {
public:
    BranchAndBound(const LpProblem& p, std::vector<int> int_cols, const MipOptions& o)
        : P(p), icols_(std::move(int_cols)), opt(o) {}

    MipResult run() {
        MipResult out;
        bool limit_hit = false;

        std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
        open.push(Node{-kInf, 0, 0, {}});
        long seq = 0;

        while (!open.empty()) {
            if (out.nodes >= opt.node_limit || deadline_passed()) {
                limit_hit = true;
                break;
            }
            Node node = open.top();
            open.pop();
            if (have_inc_ && node.bound >= inc_cut()) continue;

            LpResult rel = solve_relaxation(node.fixes);
            out.lp_iterations += rel.iterations;
            ++out.nodes;
            if (rel.status == LpStatus::limit) {
                limit_hit = true;
                break;
            }
            if (rel.status == LpStatus::infeasible) continue;
            if (rel.status == LpStatus::unbounded) {
                // Binaries are bounded, so an unbounded relaxation means the
                // continuous part is unbounded for the whole subproblem.
                if (node.depth == 0 && !have_inc_) {
                    out.status = LpStatus::unbounded;
                    out.nodes = std::max(out.nodes, 1L);
                    return out;
                }
                continue;
            }
            if (rel.status == LpStatus::numerical) {
                out.status = LpStatus::numerical;
                return out;
            }
            if (have_inc_ && rel.objective >= inc_cut()) continue;

            const int bcol = most_fractional(rel.x);
            if (bcol < 0) {
                offer_incumbent(rel.objective, rel.x);
                continue;
            }

            if (opt.repair) {
                std::vector<double> x = rel.x;
                if (opt.repair(x) && point_feasible(x)) offer_incumbent(objective_of(x), x);
            }
            if (have_inc_ && rel.objective >= inc_cut()) continue;

            if (!have_inc_ || node.depth % 4 == 0) try_roundings(rel.x);
            if (!have_inc_) dive(node.fixes, rel, out);

            if (have_inc_ && rel.objective >= inc_cut()) continue;

            const double frac = rel.x[bcol] - std::floor(rel.x[bcol]);
            const int8_t first = frac >= 0.5 ? 1 : 0;
            Node a{rel.objective, node.depth + 1, ++seq, node.fixes};
            a.fixes.emplace_back(bcol, first);
            Node b{rel.objective, node.depth + 1, ++seq, node.fixes};
            b.fixes.emplace_back(bcol, static_cast<int8_t>(1 - first));
            open.push(std::move(a));
            open.push(std::move(b));
        }

        if (limit_hit) {
            out.status = LpStatus::limit;
            if (have_inc_) {
                out.objective = inc_obj_;
                out.x = inc_x_;
            }
        } else if (have_inc_) {
            out.status = LpStatus::optimal;
            out.objective = inc_obj_;
            out.x = inc_x_;
        } else {
            out.status = LpStatus::infeasible;
        }
        return out;
    }

private:
    struct Node {
        double bound;
        int depth;
        long seq;
        std::vector<std::pair<int, int8_t>> fixes;
    };
    struct NodeOrder {
        bool operator()(const Node& a, const Node& b) const {
            if (a.bound != b.bound) return a.bound > b.bound;
            return a.seq > b.seq;
        }
    };

    const LpProblem& P;
    std::vector<int> icols_;
    MipOptions opt;
    bool have_inc_ = false;
    double inc_obj_ = kInf;
    std::vector<double> inc_x_;

    bool deadline_passed() const {
        return opt.lp.has_deadline && std::chrono::steady_clock::now() > opt.lp.deadline;
    }

    double inc_cut() const { return inc_obj_ - opt.mip_gap * std::max(1.0, std::abs(inc_obj_)); }

    LpResult solve_relaxation(const std::vector<std::pair<int, int8_t>>& fixes) {
        if (fixes.empty()) {
            BoundedSimplex s(P, opt.lp);
            return s.run();
        }
        std::vector<double> lo = P.lo, hi = P.hi;
        for (const auto& [col, v] : fixes) lo[col] = hi[col] = static_cast<double>(v);
        BoundedSimplex s(P, opt.lp, &lo, &hi);
        return s.run();
    }

    int most_fractional(const std::vector<double>& x) const {
        int best = -1;
        double best_frac = opt.int_tol;
        for (int j : icols_) {
            const double f = std::abs(x[j] - std::round(x[j]));
            if (f > best_frac) {
                best_frac = f;
                best = j;
            }
        }
        return best;
    }

    void offer_incumbent(double obj, const std::vector<double>& x) {
        if (!have_inc_ || obj < inc_obj_) {
            have_inc_ = true;
            inc_obj_ = obj;
            inc_x_ = x;
            for (int j : icols_) inc_x_[j] = std::round(inc_x_[j]);
        }
    }

    // Rounds the relaxation three ways and keeps any rounding that is feasible
    // as-is (continuous part unchanged).
    void try_roundings(const std::vector<double>& relax) {
        for (int mode = 0; mode < 3; ++mode) {
            std::vector<double> x = relax;
            for (int j : icols_) {
                double v = x[j];
                if (mode == 0) v = v > 0.5 ? 1.0 : 0.0;
                else if (mode == 1) v = std::ceil(v - opt.int_tol);
                else v = std::floor(v + opt.int_tol);
                x[j] = std::clamp(v, P.lo[j], P.hi[j]);
            }
            if (!point_feasible(x)) continue;
            offer_incumbent(objective_of(x), x);
        }
    }

    double objective_of(const std::vector<double>& x) const {
        double obj = 0.0;
        for (int j = 0; j < P.n_total(); ++j)
            if (P.cost[j] != 0.0) obj += P.cost[j] * x[j];
        return obj;
    }

    bool point_feasible(std::vector<double>& x) const {
        const double ft = 10.0 * opt.lp.feas_tol;
        for (int j = 0; j < P.n_struct; ++j) {
            if (x[j] < P.lo[j] - ft * (1.0 + std::abs(P.lo[j]))) return false;
            if (x[j] > P.hi[j] + ft * (1.0 + std::abs(P.hi[j]))) return false;
        }
        for (int r = 0; r < P.m; ++r) {
            double act = 0.0;
            for (int k = P.row_start[r]; k < P.row_start[r + 1]; ++k) {
                const int j = P.row_col[k];
                if (j < P.n_struct) act += P.row_val[k] * x[j];
            }
            const int sc = P.n_struct + r;
            const double s = P.b[r] - act;
            const double t = ft * (1.0 + std::abs(P.b[r]));
            if (s < P.lo[sc] - t || s > P.hi[sc] + t) return false;
            x[sc] = std::clamp(s, P.lo[sc], P.hi[sc]);
        }
        return true;
    }

    // Fix-and-resolve dive from a fractional relaxation. Fixes only the most
    // decided fractional variables each round: rounding everything at once
    // tends to produce contradictory fixes whose infeasible children grind
    // through phase 1 for nothing. Dive LPs also run on a short iteration
    // leash; a child that will not converge quickly is not worth finishing.
    void dive(const std::vector<std::pair<int, int8_t>>& base, const LpResult& start,
              MipResult& out) {
        std::vector<std::pair<int, int8_t>> fixes = base;
        LpOptions lp = opt.lp;
        lp.iter_limit = 20 * (P.m + P.n_total()) + 2000;
        LpResult cur = start;
        for (int round = 0; round < opt.dive_rounds; ++round) {
            if (deadline_passed()) return;
            std::vector<std::pair<double, int>> frac;
            for (int j : icols_) {
                const double v = cur.x[j];
                const double f = std::abs(v - std::round(v));
                if (f > opt.int_tol) frac.emplace_back(f, j);
            }
            if (frac.empty()) {
                offer_incumbent(cur.objective, cur.x);
                return;
            }
            const size_t take = std::min<size_t>(4, frac.size());
            std::partial_sort(frac.begin(), frac.begin() + take, frac.end());
            for (size_t i = 0; i < take; ++i) {
                const int j = frac[i].second;
                fixes.emplace_back(j, static_cast<int8_t>(cur.x[j] > 0.5 ? 1 : 0));
            }
            std::vector<double> lo = P.lo, hi = P.hi;
            for (const auto& [col, v] : fixes) lo[col] = hi[col] = static_cast<double>(v);
            BoundedSimplex s(P, lp, &lo, &hi);
            cur = s.run();
            out.lp_iterations += cur.iterations;
            if (cur.status != LpStatus::optimal) return;
            if (have_inc_ && cur.objective >= inc_cut()) return;
        }
    }
};

}
