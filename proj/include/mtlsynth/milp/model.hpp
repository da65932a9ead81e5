#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"

namespace mtlsynth::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;
/// Solve budget: a wall-clock instant, an allowance of simplex pivots, or
/// both. Copies share one pivot counter, so a budget spans every solve it is
/// handed to. Default-constructed means no limit.
class Deadline {
public:
  Deadline() = default;
  Deadline(Clock::time_point at) : at_(at) {}

  /// Deterministic budget of `pivots` simplex iterations.
  static Deadline work(long pivots) {
    Deadline d;
    d.work_ = std::make_shared<Work>(Work{pivots, 0});
    return d;
  }

  bool limited() const { return at_.has_value() || work_ != nullptr; }
  bool wall_expired() const { return at_ && Clock::now() >= *at_; }
  bool work_exhausted() const { return work_ && work_->used >= work_->limit; }
  bool expired() const { return work_exhausted() || wall_expired(); }
  void charge(long pivots = 1) const {
    if (work_) work_->used += pivots;
  }
  long work_used() const { return work_ ? work_->used : 0; }

private:
  struct Work {
    long limit;
    long used;
  };
  std::optional<Clock::time_point> at_;
  std::shared_ptr<Work> work_;
};

inline Deadline deadline_after(double seconds) {
  return Deadline(Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds)));
}

inline bool expired(const Deadline& d) { return d.expired(); }

enum class VarKind : std::uint8_t { Continuous, Binary };
enum class Relation : std::uint8_t { LessEqual, Equal, GreaterEqual };

struct Term {
  int var;
  double coef;
  friend bool operator==(const Term&, const Term&) = default;
};

struct Variable {
  double lower = 0.0;
  double upper = kInf;
  VarKind kind = VarKind::Continuous;
  std::string name;
};

struct Row {
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  bool active = true;
  std::string name;

  /// Activity bounds: the row reads lower <= a.x <= upper.
  double lower() const { return relation == Relation::LessEqual ? -kInf : rhs; }
  double upper() const { return relation == Relation::GreaterEqual ? kInf : rhs; }
};

enum class BasisStatus : std::uint8_t { Basic, AtLower, AtUpper, AtZero };

/// Simplex basis keyed by model variable id and model row id.
struct Basis {
  std::vector<BasisStatus> vars;
  std::vector<BasisStatus> rows;
};

enum class Status { Optimal, Infeasible, Unbounded, BudgetExceeded, NumericalFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::BudgetExceeded: return "budget-exceeded";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

struct SolveStats {
  long simplex_iterations = 0;
  long nodes = 0;
  double seconds = 0.0;
};

struct Solution {
  Status status = Status::Infeasible;
  /// Variable values (empty when no point is available).
  std::vector<double> values;
  double objective = kInf;
  /// Row duals indexed by model row id (LP solves only; 0 for inactive rows).
  std::vector<double> row_duals;
  SolveStats stats;

  bool has_point() const { return !values.empty(); }
};

/// Mixed-integer linear program, minimization. Rows carry an activation flag:
/// inactive rows are ignored by every solve but stay encoded.
class Model {
public:
  int add_variable(double lower, double upper, VarKind kind = VarKind::Continuous, std::string name = {}) {
    if (kind == VarKind::Binary) {
      lower = std::max(lower, 0.0);
      upper = std::min(upper, 1.0);
    }
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
      throw ModelError("variable '" + name + "' has inconsistent bounds");
    }
    vars_.push_back({lower, upper, kind, std::move(name)});
    objective_.push_back(0.0);
    return static_cast<int>(vars_.size()) - 1;
  }

  int add_binary(std::string name = {}) { return add_variable(0.0, 1.0, VarKind::Binary, std::move(name)); }

  int add_row(std::vector<Term> terms, Relation relation, double rhs, bool active = true, std::string name = {}) {
    Row row;
    row.terms = canonical(std::move(terms));
    row.relation = relation;
    row.rhs = rhs;
    row.active = active;
    row.name = std::move(name);
    if (!std::isfinite(rhs)) throw ModelError("row '" + row.name + "' has a non-finite right-hand side");
    rows_.push_back(std::move(row));
    return static_cast<int>(rows_.size()) - 1;
  }

  /// Sets the (minimized) objective; unnamed variables get coefficient 0.
  void set_objective(const std::vector<Term>& terms) {
    std::fill(objective_.begin(), objective_.end(), 0.0);
    for (const auto& t : canonical(terms)) objective_[static_cast<std::size_t>(t.var)] = t.coef;
  }

  void set_row_active(int row, bool active) { row_at(row).active = active; }

  void update_row(int row, std::vector<Term> terms, double rhs) {
    Row& r = row_at(row);
    if (!std::isfinite(rhs)) throw ModelError("row '" + r.name + "' has a non-finite right-hand side");
    r.terms = canonical(std::move(terms));
    r.rhs = rhs;
  }

  void set_bounds(int var, double lower, double upper) {
    Variable& v = var_at(var);
    if (v.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0)) {
      throw ModelError("binary variable '" + v.name + "' bounds must stay within [0, 1]");
    }
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
      throw ModelError("variable '" + v.name + "' has inconsistent bounds");
    }
    v.lower = lower;
    v.upper = upper;
  }

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  int num_active_rows() const {
    return static_cast<int>(std::count_if(rows_.begin(), rows_.end(), [](const Row& r) { return r.active; }));
  }
  int num_binaries() const {
    return static_cast<int>(
        std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) { return v.kind == VarKind::Binary; }));
  }

  const Variable& variable(int id) const { return const_cast<Model*>(this)->var_at(id); }
  const Row& row(int id) const { return const_cast<Model*>(this)->row_at(id); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<double>& objective() const { return objective_; }

  double objective_value(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < objective_.size(); ++j) v += objective_[j] * x[j];
    return v;
  }

  double row_activity(int id, const std::vector<double>& x) const {
    double a = 0.0;
    for (const auto& t : row(id).terms) a += t.coef * x[static_cast<std::size_t>(t.var)];
    return a;
  }

  /// Largest violation of bounds, active rows and (optionally) integrality.
  double max_violation(const std::vector<double>& x, bool integrality = true) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
      worst = std::max({worst, vars_[j].lower - x[j], x[j] - vars_[j].upper});
      if (integrality && vars_[j].kind == VarKind::Binary) worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
    for (int i = 0; i < num_rows(); ++i) {
      if (!rows_[static_cast<std::size_t>(i)].active) continue;
      const double a = row_activity(i, x);
      worst = std::max({worst, row(i).lower() - a, a - row(i).upper()});
    }
    return worst;
  }

  /// Last basis produced by a solve; reused as a warm start when still valid.
  const std::optional<Basis>& warm_basis() const { return warm_; }
  void set_warm_basis(std::optional<Basis> b) { warm_ = std::move(b); }

private:
  Variable& var_at(int id) {
    if (id < 0 || id >= num_variables()) throw ModelError("unknown variable id " + std::to_string(id));
    return vars_[static_cast<std::size_t>(id)];
  }
  Row& row_at(int id) {
    if (id < 0 || id >= num_rows()) throw ModelError("unknown row id " + std::to_string(id));
    return rows_[static_cast<std::size_t>(id)];
  }

  /// Sorted by variable, duplicates summed, exact zeros dropped.
  std::vector<Term> canonical(std::vector<Term> terms) const {
    for (const auto& t : terms) {
      if (t.var < 0 || t.var >= num_variables()) throw ModelError("term references unknown variable " + std::to_string(t.var));
      if (!std::isfinite(t.coef)) throw ModelError("non-finite coefficient");
    }
    std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> out;
    for (const auto& t : terms) {
      if (!out.empty() && out.back().var == t.var) {
        out.back().coef += t.coef;
      } else {
        out.push_back(t);
      }
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
  }

  std::vector<Variable> vars_;
  std::vector<Row> rows_;
  std::vector<double> objective_;
  std::optional<Basis> warm_;
};

}  // namespace mtlsynth::milp
