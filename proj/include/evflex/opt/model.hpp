#pragma once

// Solver-agnostic container for mixed-integer linear programs. Rows and
// columns are built incrementally; backends consume the finished model.

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "../common.hpp"

namespace evflex::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { continuous, binary };
enum class Sense { le, eq, ge };
enum class Goal { minimize, maximize };

using VarId = int;

struct VarDef {
    std::string name;
    VarKind kind = VarKind::continuous;
    double lo = 0.0;
    double hi = kInf;
};

struct LinTerm {
    VarId var;
    double coef;
};

class Model {
public:
    explicit Model(std::string name = "model") : name_(std::move(name)) {}

    VarId add_var(const VarDef& def) {
        if (def.name.empty())
            throw ConfigError("model '" + name_ + "': variable name must be non-empty");
        if (by_name_.count(def.name))
            throw ConfigError("model '" + name_ + "': duplicate variable name '" + def.name + "'");
        double lo = def.lo, hi = def.hi;
        if (def.kind == VarKind::binary) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
        }
        if (std::isnan(lo) || std::isnan(hi) || lo > hi)
            throw ConfigError("model '" + name_ + "': variable '" + def.name + "' has empty domain");
        VarId id = static_cast<VarId>(vars_.size());
        vars_.push_back({def.name, def.kind, lo, hi});
        by_name_.emplace(def.name, id);
        obj_.push_back(0.0);
        return id;
    }

    int add_constraint(std::span<const LinTerm> terms, Sense sense, double rhs,
                       std::string name = {}) {
        int row = static_cast<int>(row_sense_.size());
        for (const auto& t : terms) {
            check_var(t.var, "constraint");
            if (!std::isfinite(t.coef))
                throw ConfigError("model '" + name_ + "': non-finite coefficient in row " +
                                  std::to_string(row));
        }
        if (std::isnan(rhs))
            throw ConfigError("model '" + name_ + "': non-finite rhs in row " +
                              std::to_string(row));
        row_start_.push_back(static_cast<int>(entry_var_.size()));
        for (const auto& t : terms) {
            if (t.coef == 0.0) continue;
            entry_var_.push_back(t.var);
            entry_coef_.push_back(t.coef);
        }
        row_sense_.push_back(sense);
        row_rhs_.push_back(rhs);
        row_name_.push_back(std::move(name));
        return row;
    }

    int add_constraint(std::initializer_list<LinTerm> terms, Sense sense, double rhs,
                       std::string name = {}) {
        return add_constraint(std::span<const LinTerm>(terms.begin(), terms.size()),
                              sense, rhs, std::move(name));
    }

    // Replaces any previously installed objective.
    void set_objective(std::span<const LinTerm> terms, Goal goal) {
        std::fill(obj_.begin(), obj_.end(), 0.0);
        for (const auto& t : terms) {
            check_var(t.var, "objective");
            obj_[t.var] += t.coef;
        }
        goal_ = goal;
    }

    void set_objective(std::initializer_list<LinTerm> terms, Goal goal) {
        set_objective(std::span<const LinTerm>(terms.begin(), terms.size()), goal);
    }

    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_constraints() const { return static_cast<int>(row_sense_.size()); }
    const VarDef& var(VarId id) const {
        check_var(id, "lookup");
        return vars_[id];
    }
    const std::string& name() const { return name_; }
    Goal goal() const { return goal_; }
    const std::vector<double>& objective() const { return obj_; }

    // Row storage accessors (CSR-style, trailing row closed implicitly).
    int row_begin(int r) const { return row_start_[r]; }
    int row_end(int r) const {
        return r + 1 < static_cast<int>(row_start_.size()) ? row_start_[r + 1]
                                                           : static_cast<int>(entry_var_.size());
    }
    VarId entry_var(int k) const { return entry_var_[k]; }
    double entry_coef(int k) const { return entry_coef_[k]; }
    Sense row_sense(int r) const { return row_sense_[r]; }
    double row_rhs(int r) const { return row_rhs_[r]; }
    const std::string& row_name(int r) const { return row_name_[r]; }

    double activity(int r, const std::vector<double>& x) const {
        double acc = 0.0;
        for (int k = row_begin(r); k < row_end(r); ++k) acc += entry_coef_[k] * x[entry_var_[k]];
        return acc;
    }

    void write_lp(std::ostream& os) const;

private:
    void check_var(VarId id, const char* where) const {
        if (id < 0 || id >= static_cast<int>(vars_.size()))
            throw ConfigError("model '" + name_ + "': unknown variable handle in " +
                              std::string(where));
    }

    std::string name_;
    std::vector<VarDef> vars_;
    std::unordered_map<std::string, VarId> by_name_;
    std::vector<double> obj_;
    Goal goal_ = Goal::minimize;
    std::vector<int> row_start_;
    std::vector<VarId> entry_var_;
    std::vector<double> entry_coef_;
    std::vector<Sense> row_sense_;
    std::vector<double> row_rhs_;
    std::vector<std::string> row_name_;
};

namespace detail {
inline std::string lp_token(const std::string& s, const char* fallback, int index) {
    std::string out;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty()) out = std::string(fallback) + std::to_string(index);
    return out;
}
}

inline void Model::write_lp(std::ostream& os) const {
    os << "\\ model: " << name_ << "\n";
    os << (goal_ == Goal::minimize ? "Minimize\n" : "Maximize\n");
    os << " obj:";
    bool first = true;
    for (int j = 0; j < num_vars(); ++j) {
        if (obj_[j] == 0.0) continue;
        double c = obj_[j];
        os << (c < 0 ? " - " : (first ? " " : " + ")) << std::abs(c) << " "
           << detail::lp_token(vars_[j].name, "x", j);
        first = false;
    }
    if (first) os << " 0 " << (num_vars() ? detail::lp_token(vars_[0].name, "x", 0) : "none");
    os << "\nSubject To\n";
    for (int r = 0; r < num_constraints(); ++r) {
        os << " " << (row_name_[r].empty() ? "c" + std::to_string(r)
                                           : detail::lp_token(row_name_[r], "c", r))
           << ":";
        bool f = true;
        for (int k = row_begin(r); k < row_end(r); ++k) {
            double c = entry_coef_[k];
            os << (c < 0 ? " - " : (f ? " " : " + ")) << std::abs(c) << " "
               << detail::lp_token(vars_[entry_var_[k]].name, "x", entry_var_[k]);
            f = false;
        }
        if (f) os << " 0 " << detail::lp_token(vars_.empty() ? "none" : vars_[0].name, "x", 0);
        const char* op = row_sense_[r] == Sense::le ? " <= "
                         : row_sense_[r] == Sense::eq ? " = " : " >= ";
        os << op << row_rhs_[r] << "\n";
    }
    os << "Bounds\n";
    for (int j = 0; j < num_vars(); ++j) {
        const auto& v = vars_[j];
        std::string tok = detail::lp_token(v.name, "x", j);
        if (v.lo == -kInf && v.hi == kInf) {
            os << " " << tok << " free\n";
        } else if (v.hi == kInf) {
            os << " " << tok << " >= " << v.lo << "\n";
        } else if (v.lo == -kInf) {
            os << " " << tok << " <= " << v.hi << "\n";
        } else {
            os << " " << v.lo << " <= " << tok << " <= " << v.hi << "\n";
        }
    }
    bool any_bin = false;
    for (const auto& v : vars_) any_bin = any_bin || v.kind == VarKind::binary;
    if (any_bin) {
        os << "Binaries\n";
        for (int j = 0; j < num_vars(); ++j)
            if (vars_[j].kind == VarKind::binary)
                os << " " << detail::lp_token(vars_[j].name, "x", j);
        os << "\n";
    }
    os << "End\n";
}

}
