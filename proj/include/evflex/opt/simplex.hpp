#pragma once

// Bounded-variable revised primal simplex.
//
// Basis handling: LU factorization (Eigen SparseLU) refreshed periodically,
// product-form eta updates between refreshes. Composite phase 1 drives
// out-of-bound basics back inside their ranges with a conservative blocking
// ratio test; Dantzig pricing over rotating column blocks with a Bland
// fallback when progress stalls. Everything is deterministic.

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "model.hpp"

namespace evflex::opt::detail {

// min cost'x  s.t.  A_struct x_struct + s = b, with slack bounds encoding the
// row sense (le: s >= 0, ge: s <= 0, eq: s = 0). Columns: structural first,
// then one slack per row.
struct LpProblem {
    int m = 0;
    int n_struct = 0;
    std::vector<int> col_start, col_row;
    std::vector<double> col_val;
    std::vector<int> row_start, row_col;
    std::vector<double> row_val;
    std::vector<double> cost;
    std::vector<double> lo, hi;
    std::vector<double> b;

    int n_total() const { return static_cast<int>(lo.size()); }

    void build_row_form() {
        const int n = n_total();
        row_start.assign(m + 1, 0);
        for (int j = 0; j < n; ++j)
            for (int k = col_start[j]; k < col_start[j + 1]; ++k) row_start[col_row[k] + 1]++;
        for (int r = 0; r < m; ++r) row_start[r + 1] += row_start[r];
        row_col.resize(col_row.size());
        row_val.resize(col_row.size());
        std::vector<int> fill(row_start.begin(), row_start.end() - 1);
        for (int j = 0; j < n; ++j)
            for (int k = col_start[j]; k < col_start[j + 1]; ++k) {
                int r = col_row[k];
                row_col[fill[r]] = j;
                row_val[fill[r]] = col_val[k];
                ++fill[r];
            }
    }
};

enum class LpStatus { optimal, infeasible, unbounded, limit, numerical };

struct LpOptions {
    double feas_tol = 1e-7;
    double dual_tol = 1e-9;
    double pivot_tol = 1e-8;
    int refactor_every = 128;
    long iter_limit = 0;  // 0: derived from problem size
    bool has_deadline = false;
    std::chrono::steady_clock::time_point deadline{};
};

struct LpResult {
    LpStatus status = LpStatus::numerical;
    double objective = 0.0;
    std::vector<double> x;  // full column values, populated when optimal
    long iterations = 0;
};

class BoundedSimplex {
public:
    BoundedSimplex(const LpProblem& p, const LpOptions& o,
                   const std::vector<double>* lo_override = nullptr,
                   const std::vector<double>* hi_override = nullptr)
        : P(p),
          opt(o),
          m(p.m),
          n(p.n_total()),
          lo_(lo_override ? *lo_override : p.lo),
          hi_(hi_override ? *hi_override : p.hi) {}

    LpResult run() {
        init_state();
        crash_basis();
        if (!factorize()) {
            reset_slack_basis();
            if (!factorize()) return make_result(LpStatus::numerical);
        }
        compute_basics();

        const long lim = opt.iter_limit > 0 ? opt.iter_limit : 400L * (m + n) + 40000;
        int clean_confirms = 0;

        while (true) {
            if (iters_ > lim) return make_result(LpStatus::limit);
            if ((iters_ & 63) == 0 && deadline_passed()) return make_result(LpStatus::limit);

            const double violation = refresh_infeasibility();
            const bool ph1 = infeas_count_ > 0;
            track_progress(ph1, violation);

            Cand cand = price(ph1, bland_);
            if (cand.col < 0) {
                // Nothing improving: confirm on a freshly factorized basis
                // before trusting the verdict.
                if (dirty_) {
                    refactor_recompute();
                    if (++clean_confirms > 60) return make_result(LpStatus::numerical);
                    continue;
                }
                if (ph1) return make_result(LpStatus::infeasible);
                return finalize_optimal();
            }
            clean_confirms = 0;

            load_column(cand.col, w_);
            ftran(w_);

            Ratio rt = ratio_test(cand, ph1);
            if (rt.kind == Ratio::unbounded) {
                if (dirty_) {
                    refactor_recompute();
                    continue;
                }
                if (ph1) return make_result(LpStatus::numerical);
                return make_result(LpStatus::unbounded);
            }
            if (rt.kind == Ratio::reject) {
                banned_col_ = cand.col;
                if (dirty_) refactor_recompute();
                else if (++reject_streak_ > 30) return make_result(LpStatus::numerical);
                continue;
            }
            reject_streak_ = 0;
            banned_col_ = -1;
            apply_step(cand, rt);
            ++iters_;

            if (static_cast<int>(etas_.size()) >= opt.refactor_every) refactor_recompute();
        }
    }

private:
    static constexpr int8_t kAtLo = 0, kAtUp = 1, kAtZero = 2;
    static constexpr int kScanBlock = 512;

    struct Cand {
        int col = -1;
        int dir = 0;
        double score = 0.0;
    };

    struct Eta {
        int slot;
        double diag;
        std::vector<std::pair<int, double>> nz;  // entries excluding the slot
    };

    struct Ratio {
        enum Kind { flip, pivot, unbounded, reject } kind = unbounded;
        double t = 0.0;
        int slot = -1;
        double leave_target = 0.0;
        int8_t leave_stat = kAtLo;
    };

    const LpProblem& P;
    LpOptions opt;
    int m, n;
    std::vector<double> lo_, hi_;

    std::vector<int> basis_;
    std::vector<int> slot_of_;
    std::vector<int8_t> nb_;
    std::vector<double> x_;
    std::vector<int8_t> slot_infeas_;
    int infeas_count_ = 0;

    Eigen::SparseMatrix<double> Bmat_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    std::vector<Eta> etas_;
    Eigen::VectorXd ev_;
    std::vector<double> w_, y_, cB_, rhs_;

    long iters_ = 0;
    int cursor_ = 0;
    bool bland_ = false;
    bool dirty_ = false;
    long stall_ = 0;
    int reject_streak_ = 0;
    int banned_col_ = -1;
    double best_metric_ = kInf;
    bool prev_ph1_ = true;

    bool deadline_passed() const {
        return opt.has_deadline && std::chrono::steady_clock::now() > opt.deadline;
    }

    void init_state() {
        x_.assign(n, 0.0);
        nb_.assign(n, kAtZero);
        slot_of_.assign(n, -1);
        basis_.resize(m);
        slot_infeas_.assign(m, 0);
        w_.assign(m, 0.0);
        y_.assign(m, 0.0);
        cB_.assign(m, 0.0);
        rhs_.assign(m, 0.0);
        ev_.resize(m);
        for (int j = 0; j < n; ++j) {
            const double l = lo_[j], u = hi_[j];
            if (l > -kInf && (std::abs(l) <= std::abs(u) || u >= kInf)) {
                nb_[j] = kAtLo;
                x_[j] = l;
            } else if (u < kInf) {
                nb_[j] = kAtUp;
                x_[j] = u;
            } else {
                nb_[j] = kAtZero;
                x_[j] = 0.0;
            }
        }
    }

    void reset_slack_basis() {
        for (int j = 0; j < n; ++j) slot_of_[j] = -1;
        for (int r = 0; r < m; ++r) {
            basis_[r] = P.n_struct + r;
            slot_of_[P.n_struct + r] = r;
        }
        etas_.clear();
    }

    // Picks structural columns into the starting basis where a slack start
    // would violate its own bounds (equality rows mostly). A column is taken
    // only if its other nonzeros all sit in rows still carrying their slack,
    // which keeps the basis trivially nonsingular.
    void crash_basis() {
        reset_slack_basis();
        std::vector<int8_t> row_structural(m, 0);
        std::vector<double> colmax(n, 0.0);
        std::vector<int> colnnz(n, 0);
        for (int j = 0; j < P.n_struct; ++j) {
            for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
                colmax[j] = std::max(colmax[j], std::abs(P.col_val[k]));
            colnnz[j] = P.col_start[j + 1] - P.col_start[j];
        }
        std::vector<int8_t> taken(n, 0);
        for (int r = 0; r < m; ++r) {
            const int sc = P.n_struct + r;
            double act = 0.0;
            for (int k = P.row_start[r]; k < P.row_start[r + 1]; ++k) {
                const int j = P.row_col[k];
                if (slot_of_[j] < 0 && x_[j] != 0.0) act += P.row_val[k] * x_[j];
            }
            const double sval = P.b[r] - act;
            const double stol = opt.feas_tol * (1.0 + std::abs(P.b[r]));
            const bool slack_ok =
                sval >= lo_[sc] - stol && sval <= hi_[sc] + stol && lo_[sc] < hi_[sc];
            if (slack_ok) continue;
            int pick = -1;
            double pick_piv = 0.0;
            int pick_nnz = 1 << 30;
            for (int k = P.row_start[r]; k < P.row_start[r + 1]; ++k) {
                const int j = P.row_col[k];
                if (j >= P.n_struct || taken[j] || lo_[j] >= hi_[j]) continue;
                const double piv = std::abs(P.row_val[k]);
                if (piv < 0.01 * colmax[j] || piv < 1e-10) continue;
                bool clean = true;
                for (int kk = P.col_start[j]; clean && kk < P.col_start[j + 1]; ++kk)
                    if (P.col_row[kk] != r && row_structural[P.col_row[kk]]) clean = false;
                if (!clean) continue;
                if (colnnz[j] < pick_nnz || (colnnz[j] == pick_nnz && piv > pick_piv)) {
                    pick = j;
                    pick_piv = piv;
                    pick_nnz = colnnz[j];
                }
            }
            if (pick >= 0) {
                slot_of_[P.n_struct + r] = -1;
                nb_[P.n_struct + r] = (lo_[P.n_struct + r] > -kInf) ? kAtLo : kAtUp;
                x_[P.n_struct + r] =
                    (nb_[P.n_struct + r] == kAtLo) ? std::max(lo_[P.n_struct + r], 0.0)
                                                   : std::min(hi_[P.n_struct + r], 0.0);
                basis_[r] = pick;
                slot_of_[pick] = r;
                taken[pick] = 1;
                row_structural[r] = 1;
            }
        }
    }

    bool factorize() {
        if (m == 0) {
            etas_.clear();
            dirty_ = false;
            return true;
        }
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(P.col_val.size());
        for (int slot = 0; slot < m; ++slot) {
            const int j = basis_[slot];
            for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
                trips.emplace_back(P.col_row[k], slot, P.col_val[k]);
        }
        Bmat_.resize(m, m);
        Bmat_.setFromTriplets(trips.begin(), trips.end());
        lu_.analyzePattern(Bmat_);
        lu_.factorize(Bmat_);
        etas_.clear();
        return lu_.info() == Eigen::Success;
    }

    void compute_basics() {
        if (m == 0) {
            dirty_ = false;
            return;
        }
        std::copy(P.b.begin(), P.b.end(), rhs_.begin());
        for (int j = 0; j < n; ++j) {
            if (slot_of_[j] >= 0 || x_[j] == 0.0) continue;
            for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
                rhs_[P.col_row[k]] -= P.col_val[k] * x_[j];
        }
        ftran(rhs_);
        for (int slot = 0; slot < m; ++slot) x_[basis_[slot]] = rhs_[slot];
        dirty_ = false;
    }

    void refactor_recompute() {
        if (!factorize()) {
            reset_slack_basis();
            factorize();
        }
        compute_basics();
        banned_col_ = -1;
    }

    void ftran(std::vector<double>& v) {
        if (m == 0) return;
        for (int i = 0; i < m; ++i) ev_[i] = v[i];
        ev_ = lu_.solve(ev_).eval();
        for (int i = 0; i < m; ++i) v[i] = ev_[i];
        for (const Eta& e : etas_) {
            const double t = v[e.slot] / e.diag;
            if (t != 0.0)
                for (const auto& [i, wv] : e.nz) v[i] -= wv * t;
            v[e.slot] = t;
        }
    }

    void btran(std::vector<double>& v) {
        if (m == 0) return;
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            double dot = 0.0;
            for (const auto& [i, wv] : it->nz) dot += wv * v[i];
            v[it->slot] = (v[it->slot] - dot) / it->diag;
        }
        for (int i = 0; i < m; ++i) ev_[i] = v[i];
        ev_ = lu_.adjoint().solve(ev_).eval();
        for (int i = 0; i < m; ++i) v[i] = ev_[i];
    }

    void load_column(int j, std::vector<double>& v) {
        std::fill(v.begin(), v.end(), 0.0);
        for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
            v[P.col_row[k]] = P.col_val[k];
    }

    double var_tol(int j) const {
        double scale = std::abs(x_[j]);
        if (lo_[j] > -kInf) scale = std::max(scale, std::abs(lo_[j]));
        if (hi_[j] < kInf) scale = std::max(scale, std::abs(hi_[j]));
        return opt.feas_tol * (1.0 + scale);
    }

    double refresh_infeasibility() {
        double total = 0.0;
        infeas_count_ = 0;
        for (int slot = 0; slot < m; ++slot) {
            const int c = basis_[slot];
            const double t = var_tol(c);
            int8_t f = 0;
            if (x_[c] < lo_[c] - t) {
                f = -1;
                total += lo_[c] - x_[c];
            } else if (x_[c] > hi_[c] + t) {
                f = 1;
                total += x_[c] - hi_[c];
            }
            slot_infeas_[slot] = f;
            infeas_count_ += (f != 0);
        }
        return total;
    }

    double objective_value() const {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            if (P.cost[j] != 0.0) acc += P.cost[j] * x_[j];
        return acc;
    }

    void track_progress(bool ph1, double violation) {
        if (ph1 != prev_ph1_) {
            prev_ph1_ = ph1;
            best_metric_ = kInf;
            stall_ = 0;
            bland_ = false;
        }
        const double metric = ph1 ? violation : objective_value();
        if (metric < best_metric_ - 1e-10 * (1.0 + std::abs(best_metric_))) {
            best_metric_ = metric;
            stall_ = 0;
            bland_ = false;
        } else if (++stall_ > 2L * m + 2000) {
            bland_ = true;
        }
    }

    Cand price(bool ph1, bool bland) {
        if (m > 0) {
            for (int slot = 0; slot < m; ++slot)
                cB_[slot] = ph1 ? static_cast<double>(slot_infeas_[slot]) : P.cost[basis_[slot]];
            std::copy(cB_.begin(), cB_.end(), y_.begin());
            btran(y_);
        }
        Cand best;
        auto consider = [&](int j) -> bool {
            if (slot_of_[j] >= 0 || lo_[j] >= hi_[j] || j == banned_col_) return false;
            double d = ph1 ? 0.0 : P.cost[j];
            for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k)
                d -= P.col_val[k] * y_[P.col_row[k]];
            int dir = 0;
            if (nb_[j] == kAtLo) {
                if (d < -opt.dual_tol) dir = 1;
            } else if (nb_[j] == kAtUp) {
                if (d > opt.dual_tol) dir = -1;
            } else {
                if (d < -opt.dual_tol) dir = 1;
                else if (d > opt.dual_tol) dir = -1;
            }
            if (dir == 0) return false;
            const double score = std::abs(d);
            if (score > best.score) best = {j, dir, score};
            return true;
        };
        if (bland) {
            for (int j = 0; j < n; ++j)
                if (consider(j)) return best;
            return {};
        }
        const int blocks = (n + kScanBlock - 1) / kScanBlock;
        const int start_block = (cursor_ / kScanBlock) % std::max(blocks, 1);
        for (int bi = 0; bi < blocks; ++bi) {
            const int blk = (start_block + bi) % blocks;
            const int jb = blk * kScanBlock;
            const int je = std::min(n, jb + kScanBlock);
            for (int j = jb; j < je; ++j) consider(j);
            if (best.col >= 0) {
                cursor_ = je % std::max(n, 1);
                break;
            }
        }
        return best;
    }

    Ratio ratio_test(const Cand& cand, bool ph1) {
        const int j = cand.col;
        const int dir = cand.dir;
        Ratio out;
        double t_best = dir > 0 ? hi_[j] - x_[j] : x_[j] - lo_[j];
        int r_best = -1;
        double piv_best = 0.0;
        double target_best = 0.0;
        int8_t stat_best = kAtLo;
        const double tie = 1e-9;
        for (int slot = 0; slot < m; ++slot) {
            const double w = w_[slot];
            if (std::abs(w) < 1e-11) continue;
            const double rate = -dir * w;
            const int c = basis_[slot];
            double tb = kInf;
            double tgt = 0.0;
            int8_t st = kAtLo;
            const int8_t f = ph1 ? slot_infeas_[slot] : static_cast<int8_t>(0);
            if (f == 0) {
                if (rate > 0.0) {
                    if (hi_[c] < kInf) {
                        tb = (hi_[c] - x_[c]) / rate;
                        tgt = hi_[c];
                        st = kAtUp;
                    }
                } else {
                    if (lo_[c] > -kInf) {
                        tb = (x_[c] - lo_[c]) / (-rate);
                        tgt = lo_[c];
                        st = kAtLo;
                    }
                }
            } else if (f < 0) {
                if (rate > 0.0) {
                    tb = (lo_[c] - x_[c]) / rate;
                    tgt = lo_[c];
                    st = kAtLo;
                }
            } else {
                if (rate < 0.0) {
                    tb = (x_[c] - hi_[c]) / (-rate);
                    tgt = hi_[c];
                    st = kAtUp;
                }
            }
            if (tb >= kInf) continue;
            if (tb < 0.0) tb = 0.0;
            bool take = false;
            if (tb < t_best - tie) {
                take = true;
            } else if (tb <= t_best + tie && r_best >= 0) {
                take = bland_ ? (c < basis_[r_best]) : (std::abs(w) > std::abs(piv_best));
            } else if (tb <= t_best + tie && r_best < 0 && tb < t_best) {
                take = true;
            }
            if (take) {
                t_best = std::min(t_best, tb);
                r_best = slot;
                piv_best = w;
                target_best = tgt;
                stat_best = st;
            }
        }
        if (t_best >= kInf) {
            out.kind = Ratio::unbounded;
            return out;
        }
        if (r_best < 0) {
            out.kind = Ratio::flip;
            out.t = t_best;
            return out;
        }
        if (std::abs(piv_best) < opt.pivot_tol) {
            out.kind = Ratio::reject;
            return out;
        }
        out.kind = Ratio::pivot;
        out.t = t_best;
        out.slot = r_best;
        out.leave_target = target_best;
        out.leave_stat = stat_best;
        return out;
    }

    void apply_step(const Cand& cand, const Ratio& rt) {
        const int j = cand.col;
        const int dir = cand.dir;
        const double t = rt.t;
        if (t != 0.0) {
            for (int slot = 0; slot < m; ++slot) {
                const double w = w_[slot];
                if (w != 0.0) x_[basis_[slot]] -= dir * t * w;
            }
        }
        if (rt.kind == Ratio::flip) {
            x_[j] += dir * t;
            nb_[j] = dir > 0 ? kAtUp : kAtLo;
            dirty_ = true;
            return;
        }
        const int slot = rt.slot;
        const int leave = basis_[slot];
        x_[j] += dir * t;
        x_[leave] = rt.leave_target;
        nb_[leave] = rt.leave_stat;
        slot_of_[leave] = -1;
        basis_[slot] = j;
        slot_of_[j] = slot;
        Eta e;
        e.slot = slot;
        e.diag = w_[slot];
        for (int i = 0; i < m; ++i)
            if (i != slot && std::abs(w_[i]) > 1e-12) e.nz.emplace_back(i, w_[i]);
        etas_.push_back(std::move(e));
        dirty_ = true;
    }

    LpResult finalize_optimal() {
        // dirty_ is false here: the basis was refactorized and values were
        // recomputed before optimality was accepted.
        double maxres = 0.0;
        for (int r = 0; r < m; ++r) {
            double act = 0.0;
            for (int k = P.row_start[r]; k < P.row_start[r + 1]; ++k)
                act += P.row_val[k] * x_[P.row_col[k]];
            maxres = std::max(maxres, std::abs(act - P.b[r]) / (1.0 + std::abs(P.b[r])));
        }
        if (maxres > 100.0 * opt.feas_tol) return make_result(LpStatus::numerical);
        LpResult res;
        res.status = LpStatus::optimal;
        res.objective = objective_value();
        res.x = x_;
        res.iterations = iters_;
        return res;
    }

    LpResult make_result(LpStatus s) const {
        LpResult res;
        res.status = s;
        res.objective = 0.0;
        res.iterations = iters_;
        return res;
    }
};

}
