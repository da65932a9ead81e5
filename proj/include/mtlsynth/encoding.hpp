#pragma once

// MILP encoding of a scenario: dynamics, bounds and the L1 input objective are
// always active; every (predicate occurrence, time index) pair owns a
// pre-encoded row group that starts inactive and is switched on by activate().

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"
#include "mtlsynth/milp.hpp"
#include "mtlsynth/mtl.hpp"
#include "mtlsynth/predicate.hpp"
#include "mtlsynth/robustness.hpp"
#include "mtlsynth/scenario.hpp"

namespace mtlsynth {

/// Extra tightening of every encoded predicate row so that solutions accepted
/// within the solver's feasibility tolerance still have non-negative robustness.
inline constexpr double kEncodingMargin = 1e-6;

/// Radius of the largest ball inside {x | A x <= b}; negative when empty,
/// capped at 1e6 for unbounded sets.
inline double chebyshev_radius(const Predicate& p) {
  milp::Model m;
  std::vector<int> xs;
  for (int d = 0; d < p.dim(); ++d) xs.push_back(m.add_variable(-milp::kInf, milp::kInf));
  const int r = m.add_variable(-milp::kInf, 1e6);
  for (int i = 0; i < p.faces(); ++i) {
    std::vector<milp::Term> terms{{r, 1.0}};
    for (int d = 0; d < p.dim(); ++d) terms.push_back({xs[static_cast<std::size_t>(d)], p.A()(i, d)});
    m.add_row(terms, milp::Relation::LessEqual, p.b()(i));
  }
  m.set_objective({{r, -1.0}});
  const milp::Solution s = milp::solve_lp(m);
  if (s.status == milp::Status::Unbounded) return 1e6;
  if (s.status != milp::Status::Optimal) throw GeometryError("predicate '" + p.name() + "': emptiness check failed");
  return s.values[static_cast<std::size_t>(r)];
}

/// M = max_i (b_i - min_{x in box} a_i . x) + 1 over the faces of `p`.
inline double compute_big_m(const Predicate& p, const Box& box) {
  if (!box.bounded()) throw GeometryError("big-M needs a bounded workspace");
  double m = -milp::kInf;
  for (int i = 0; i < p.faces(); ++i) {
    double lo = 0.0;
    for (int d = 0; d < p.dim(); ++d) {
      const double a = p.A()(i, d);
      lo += a * (a >= 0 ? box.lo(d) : box.hi(d));
    }
    m = std::max(m, p.b()(i) - lo);
  }
  return m + 1.0;
}

/// M for the safe indicator rows a.x <= b + M (1 - y): max_i (max_box a_i.x - b_i) + 1.
inline double compute_safe_big_m(const Predicate& p, const Box& box) {
  double m = 0.0;
  for (int i = 0; i < p.faces(); ++i) {
    double hi = 0.0;
    for (int d = 0; d < p.dim(); ++d) {
      const double a = p.A()(i, d);
      hi += a * (a >= 0 ? box.hi(d) : box.lo(d));
    }
    m = std::max(m, hi - p.b()(i));
  }
  return m + 1.0;
}

struct RowGroup {
  std::vector<int> rows;
  /// Face selectors of an unsafe group (empty for safe groups).
  std::vector<int> binaries;
  bool active = false;
};

struct Activation {
  int occurrence = -1;
  int index = 0;
  friend bool operator==(const Activation&, const Activation&) = default;
};

class Encoding {
public:
  explicit Encoding(const Scenario& scenario) : system_(scenario.system), workspace_(scenario.workspace) {
    scenario.validate();
    nnf_ = scenario.nnf();
    n_steps_ = scenario.horizon();
    rho_ = scenario.rho;
    occurrences_ = classify_occurrences(nnf_);
    for (const auto& occ : occurrences_) base_.push_back(scenario.predicate(occ.predicate));
    for (std::size_t o = 0; o < occurrences_.size(); ++o) {
      const Predicate resized = resize_for(base_[o], occurrences_[o].polarity, rho_);
      if (occurrences_[o].polarity == Polarity::Safe && !(chebyshev_radius(resized) > 1e-9)) {
        throw GeometryError("predicate '" + base_[o].name() + "' is empty after shrinking by rho = " +
                            std::to_string(rho_));
      }
      if (occurrences_[o].polarity == Polarity::Unsafe && !(chebyshev_radius(base_[o]) >= 0.0)) {
        throw GeometryError("predicate '" + base_[o].name() + "' is empty");
      }
    }
    build(scenario);
  }

  milp::Model& model() { return model_; }
  const milp::Model& model() const { return model_; }
  const Formula& formula() const { return nnf_; }
  const std::vector<PredicateOccurrence>& occurrences() const { return occurrences_; }
  int horizon() const { return n_steps_; }
  double rho() const { return rho_; }
  const LinearSystem& system() const { return system_; }
  const Box& workspace() const { return workspace_; }
  const Vector& initial_state() const { return x0_; }

  int state_var(int k, int d) const { return x_[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)]; }
  int input_var(int k, int j) const { return u_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]; }
  int slack_var(int k, int j) const { return s_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]; }
  const RowGroup& group(int occurrence, int k) const { return group_at(occurrence, k); }
  double big_m(int occurrence) const { return big_m_[static_cast<std::size_t>(occurrence)]; }

  int num_state_vars() const { return (n_steps_ + 1) * system_.n(); }
  int num_input_vars() const { return n_steps_ * system_.m(); }
  int num_slack_vars() const { return n_steps_ * system_.m(); }
  int num_groups() const { return static_cast<int>(occurrences_.size()) * (n_steps_ + 1); }
  int num_active_groups() const {
    int c = 0;
    for (const auto& per : groups_) {
      for (const auto& g : per) c += g.active ? 1 : 0;
    }
    return c;
  }

  bool is_active(int occurrence, int k) const { return group_at(occurrence, k).active; }

  /// Switches on the row group of (occurrence, k); no-op when already active.
  void activate(int occurrence, int k) { set_group(occurrence, k, true); }
  void deactivate(int occurrence, int k) { set_group(occurrence, k, false); }

  /// Original (rho = 0) and resized geometry per occurrence.
  std::vector<Predicate> original_geometry() const { return base_; }
  std::vector<Predicate> resized_geometry() const {
    std::vector<Predicate> out;
    for (std::size_t o = 0; o < base_.size(); ++o) out.push_back(resize_for(base_[o], occurrences_[o].polarity, rho_));
    return out;
  }
  const Predicate& predicate_of(int occurrence) const { return base_[static_cast<std::size_t>(occurrence)]; }

  /// Replaces the geometry of every occurrence of `name` in place; every row
  /// group (active or not) is rewritten with the new resized set.
  void update_predicate(const std::string& name, const Predicate& geometry) {
    bool found = false;
    for (std::size_t o = 0; o < occurrences_.size(); ++o) {
      if (occurrences_[o].predicate != name) continue;
      found = true;
      if (geometry.faces() != base_[o].faces()) {
        throw GeometryError("predicate '" + name + "': face count changed from " + std::to_string(base_[o].faces()) +
                            " to " + std::to_string(geometry.faces()));
      }
      if (geometry.dim() != system_.n()) throw DimensionError("predicate '" + name + "': dimension mismatch");
      if (occurrences_[o].polarity == Polarity::Safe && !(chebyshev_radius(geometry.offset(-rho_)) > 1e-9)) {
        throw GeometryError("predicate '" + name + "' is empty after shrinking by rho");
      }
    }
    if (!found) throw ScenarioError("predicate '" + name + "' does not occur in the formula");
    if (!leaf_indicators_.empty()) throw ModelError("geometry updates are not supported on a full encoding with indicators");
    for (std::size_t o = 0; o < occurrences_.size(); ++o) {
      if (occurrences_[o].predicate != name) continue;
      const Predicate renamed = geometry.renamed(name);
      const Predicate resized = resize_for(renamed, occurrences_[o].polarity, rho_);
      base_[o] = renamed;
      if (occurrences_[o].polarity == Polarity::Unsafe) {
        big_m_[o] = std::max(big_m_[o], compute_big_m(resized, workspace_));
      }
      for (int k = 0; k <= n_steps_; ++k) write_group(static_cast<int>(o), k);
    }
  }

  /// Pins inputs 0..count-1 to the given values (receding horizon prefix).
  void pin_inputs(const std::vector<Vector>& inputs, int count) {
    for (int k = 0; k < n_steps_; ++k) {
      for (int j = 0; j < system_.m(); ++j) {
        if (k < count) {
          const double v = inputs[static_cast<std::size_t>(k)](j);
          model_.set_bounds(input_var(k, j), v, v);
        } else {
          model_.set_bounds(input_var(k, j), system_.u_lo(j), system_.u_hi(j));
        }
      }
    }
  }

  /// Inputs read from a solver point.
  std::vector<Vector> inputs_from(const std::vector<double>& values) const {
    std::vector<Vector> us;
    for (int k = 0; k < n_steps_; ++k) {
      Vector u(system_.m());
      for (int j = 0; j < system_.m(); ++j) u(j) = values[static_cast<std::size_t>(input_var(k, j))];
      us.push_back(u);
    }
    return us;
  }

  /// Exact rollout of the dynamics under the given inputs.
  Trajectory trajectory_from(const std::vector<Vector>& inputs) const {
    return Trajectory(system_.rollout(x0_, inputs), system_.dt);
  }

  double objective_of(const std::vector<Vector>& inputs) const {
    double j = 0.0;
    for (const auto& u : inputs) j += weights_.dot(u.cwiseAbs());
    return j;
  }

  /// Non-lazy encoding: every leaf reached only through conjunctions and
  /// always-operators gets its row group activated; disjunctive parts of the
  /// formula are encoded with indicator variables. For formulas in the
  /// conjunction/always fragment this is exactly "all groups switched on".
  void encode_full() {
    if (full_) return;
    full_ = true;
    encode_forced(nnf_, 0);
    indicators_.clear();
  }

  bool is_full() const { return full_; }

  /// Activation pairs the full encoding switches on, in (occurrence, index) order.
  std::vector<Activation> required_groups() const {
    std::vector<Activation> out;
    collect_forced(nnf_, 0, out);
    std::sort(out.begin(), out.end(), [](const Activation& a, const Activation& b) {
      return a.occurrence != b.occurrence ? a.occurrence < b.occurrence : a.index < b.index;
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

private:
  RowGroup& group_at(int occurrence, int k) {
    return const_cast<RowGroup&>(static_cast<const Encoding&>(*this).group_at(occurrence, k));
  }
  const RowGroup& group_at(int occurrence, int k) const {
    if (occurrence < 0 || occurrence >= static_cast<int>(groups_.size()) || k < 0 || k > n_steps_) {
      throw ModelError("no row group for occurrence " + std::to_string(occurrence) + " at index " + std::to_string(k));
    }
    return groups_[static_cast<std::size_t>(occurrence)][static_cast<std::size_t>(k)];
  }

  void set_group(int occurrence, int k, bool active) {
    RowGroup& g = group_at(occurrence, k);
    if (g.active == active) return;
    g.active = active;
    for (int r : g.rows) model_.set_row_active(r, active);
  }

  std::vector<milp::Term> position_terms(const Vector& a, int k, double scale) const {
    std::vector<milp::Term> terms;
    for (int d = 0; d < system_.n(); ++d) {
      if (a(d) != 0.0) terms.push_back({state_var(k, d), scale * a(d)});
    }
    return terms;
  }

  /// (Re)writes the rows of group (o, k) from the current geometry.
  void write_group(int o, int k) {
    RowGroup& g = groups_[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)];
    const Predicate resized = resize_for(base_[static_cast<std::size_t>(o)], occurrences_[static_cast<std::size_t>(o)].polarity, rho_);
    const int f = resized.faces();
    if (occurrences_[static_cast<std::size_t>(o)].polarity == Polarity::Safe) {
      for (int i = 0; i < f; ++i) {
        model_.update_row(g.rows[static_cast<std::size_t>(i)], position_terms(resized.A().row(i).transpose(), k, 1.0),
                          resized.b()(i) - kEncodingMargin);
      }
    } else {
      const double m = big_m_[static_cast<std::size_t>(o)];
      for (int i = 0; i < f; ++i) {
        auto terms = position_terms(resized.A().row(i).transpose(), k, 1.0);
        terms.push_back({g.binaries[static_cast<std::size_t>(i)], m});
        model_.update_row(g.rows[static_cast<std::size_t>(i)], std::move(terms), resized.b()(i) + kEncodingMargin);
      }
    }
  }

  void build(const Scenario& sc) {
    const int n = system_.n();
    const int mdim = system_.m();
    x0_ = sc.x0;
    weights_ = sc.weights;
    x_.assign(static_cast<std::size_t>(n_steps_ + 1), {});
    for (int k = 0; k <= n_steps_; ++k) {
      for (int d = 0; d < n; ++d) {
        const std::string label = system_.state_labels.empty() ? "x" + std::to_string(d) : system_.state_labels[static_cast<std::size_t>(d)];
        const double lo = k == 0 ? x0_(d) : workspace_.lo(d);
        const double hi = k == 0 ? x0_(d) : workspace_.hi(d);
        x_[static_cast<std::size_t>(k)].push_back(model_.add_variable(lo, hi, milp::VarKind::Continuous, label + "_" + std::to_string(k)));
      }
    }
    u_.assign(static_cast<std::size_t>(n_steps_), {});
    s_.assign(static_cast<std::size_t>(n_steps_), {});
    std::vector<milp::Term> objective;
    for (int k = 0; k < n_steps_; ++k) {
      for (int j = 0; j < mdim; ++j) {
        const std::string label = system_.input_labels.empty() ? "u" + std::to_string(j) : system_.input_labels[static_cast<std::size_t>(j)];
        const int u = model_.add_variable(system_.u_lo(j), system_.u_hi(j), milp::VarKind::Continuous, label + "_" + std::to_string(k));
        const int s = model_.add_variable(0.0, milp::kInf, milp::VarKind::Continuous, "s" + label.substr(1) + "_" + std::to_string(k));
        u_[static_cast<std::size_t>(k)].push_back(u);
        s_[static_cast<std::size_t>(k)].push_back(s);
        objective.push_back({s, weights_(j)});
      }
    }
    model_.set_objective(objective);
    // Dynamics: x_{k+1} - A x_k - B u_k = 0.
    for (int k = 0; k < n_steps_; ++k) {
      for (int d = 0; d < n; ++d) {
        std::vector<milp::Term> t{{state_var(k + 1, d), 1.0}};
        for (int e = 0; e < n; ++e) {
          if (system_.A(d, e) != 0.0) t.push_back({state_var(k, e), -system_.A(d, e)});
        }
        for (int j = 0; j < mdim; ++j) {
          if (system_.B(d, j) != 0.0) t.push_back({input_var(k, j), -system_.B(d, j)});
        }
        model_.add_row(t, milp::Relation::Equal, 0.0, true, "dyn_" + std::to_string(k) + "_" + std::to_string(d));
      }
    }
    // |u_kj| <= s_kj.
    for (int k = 0; k < n_steps_; ++k) {
      for (int j = 0; j < mdim; ++j) {
        const std::string tag = std::to_string(k) + "_" + std::to_string(j);
        model_.add_row({{input_var(k, j), 1.0}, {slack_var(k, j), -1.0}}, milp::Relation::LessEqual, 0.0, true, "abs_hi_" + tag);
        model_.add_row({{input_var(k, j), -1.0}, {slack_var(k, j), -1.0}}, milp::Relation::LessEqual, 0.0, true, "abs_lo_" + tag);
      }
    }
    // Predicate row groups, all inactive.
    groups_.assign(occurrences_.size(), std::vector<RowGroup>(static_cast<std::size_t>(n_steps_ + 1)));
    big_m_.assign(occurrences_.size(), 0.0);
    for (std::size_t o = 0; o < occurrences_.size(); ++o) {
      const bool safe = occurrences_[o].polarity == Polarity::Safe;
      const Predicate resized = resize_for(base_[o], occurrences_[o].polarity, rho_);
      if (!safe) big_m_[o] = compute_big_m(resized, workspace_);
      const int f = resized.faces();
      for (int k = 0; k <= n_steps_; ++k) {
        RowGroup& g = groups_[o][static_cast<std::size_t>(k)];
        const std::string tag = "o" + std::to_string(o) + "_k" + std::to_string(k);
        if (safe) {
          for (int i = 0; i < f; ++i) {
            g.rows.push_back(model_.add_row({}, milp::Relation::LessEqual, 0.0, false, "safe_" + tag + "_f" + std::to_string(i)));
          }
        } else {
          std::vector<milp::Term> card;
          for (int i = 0; i < f; ++i) {
            const int z = model_.add_binary("z_" + tag + "_f" + std::to_string(i));
            g.binaries.push_back(z);
            card.push_back({z, 1.0});
            g.rows.push_back(model_.add_row({}, milp::Relation::GreaterEqual, 0.0, false, "unsafe_" + tag + "_f" + std::to_string(i)));
          }
          g.rows.push_back(model_.add_row(card, milp::Relation::LessEqual, f - 1.0, false, "card_" + tag));
        }
        write_group(static_cast<int>(o), k);
      }
    }
  }

  // ----- full encoding -----

  void collect_forced(const Formula& f, int k, std::vector<Activation>& out) const {
    switch (f.op) {
      case Op::Pred: out.push_back({f.occurrence, k}); return;
      case Op::Not: out.push_back({f.args[0].occurrence, k}); return;
      case Op::And:
        for (const auto& a : f.args) collect_forced(a, k, out);
        return;
      case Op::Globally: {
        const IndexWindow w = window(f, k);
        for (int j = w.first; j <= w.last; ++j) collect_forced(f.args[0], j, out);
        return;
      }
      default: return;
    }
  }

  IndexWindow window(const Formula& f, int k) const {
    const int tail = f.interval.bounded() ? 0 : mtlsynth::horizon(f.args[0], system_.dt);
    const IndexWindow w = index_window(f.interval, system_.dt, k, n_steps_ - tail);
    if (w.last > n_steps_ || w.first > w.last) throw HorizonError("formula window outside the encoded horizon");
    return w;
  }

  void encode_forced(const Formula& f, int k) {
    switch (f.op) {
      case Op::Pred: activate(f.occurrence, k); return;
      case Op::Not: activate(f.args[0].occurrence, k); return;
      case Op::And:
        for (const auto& a : f.args) encode_forced(a, k);
        return;
      case Op::Globally: {
        const IndexWindow w = window(f, k);
        for (int j = w.first; j <= w.last; ++j) encode_forced(f.args[0], j);
        return;
      }
      default: {
        const int y = indicator(f, k);
        model_.add_row({{y, 1.0}}, milp::Relation::GreaterEqual, 1.0, true, "root_" + std::to_string(k));
        return;
      }
    }
  }

  /// Variable y in [0,1] with y = 1 implying that `f` holds at index k.
  int indicator(const Formula& f, int k) {
    const auto key = std::make_pair(&f, k);
    if (auto it = indicators_.find(key); it != indicators_.end()) return it->second;
    int y = -1;
    switch (f.op) {
      case Op::Pred:
      case Op::Not: {
        const int o = f.op == Op::Pred ? f.occurrence : f.args[0].occurrence;
        y = leaf_indicator(o, k);
        break;
      }
      case Op::And:
      case Op::Or: {
        std::vector<int> children;
        for (const auto& a : f.args) children.push_back(indicator(a, k));
        y = combine(f.op == Op::And, children);
        break;
      }
      case Op::Globally:
      case Op::Eventually: {
        const IndexWindow w = window(f, k);
        std::vector<int> children;
        for (int j = w.first; j <= w.last; ++j) children.push_back(indicator(f.args[0], j));
        y = combine(f.op == Op::Globally, children);
        break;
      }
      case Op::Until: {
        const IndexWindow w = window(f, k);
        std::vector<int> options;
        for (int j = w.first; j <= w.last; ++j) {
          std::vector<int> parts{indicator(f.args[1], j)};
          for (int i = k; i < j; ++i) parts.push_back(indicator(f.args[0], i));
          options.push_back(combine(true, parts));
        }
        y = combine(false, options);
        break;
      }
      case Op::Implies: throw UnsupportedFragment("formula is not in negation normal form");
    }
    indicators_.emplace(key, y);
    return y;
  }

  int combine(bool conjunction, const std::vector<int>& children) {
    if (children.size() == 1) return children.front();
    const int y = model_.add_variable(0.0, 1.0);
    if (conjunction) {
      for (int c : children) model_.add_row({{y, 1.0}, {c, -1.0}}, milp::Relation::LessEqual, 0.0);
    } else {
      std::vector<milp::Term> t{{y, 1.0}};
      for (int c : children) t.push_back({c, -1.0});
      model_.add_row(t, milp::Relation::LessEqual, 0.0);
    }
    return y;
  }

  /// Binary b with b = 1 forcing the (resized) leaf constraint at index k.
  int leaf_indicator(int o, int k) {
    const auto key = std::make_pair(o, k);
    if (auto it = leaf_indicators_.find(key); it != leaf_indicators_.end()) return it->second;
    const Predicate resized = resize_for(base_[static_cast<std::size_t>(o)], occurrences_[static_cast<std::size_t>(o)].polarity, rho_);
    const int b = model_.add_binary("b_o" + std::to_string(o) + "_k" + std::to_string(k));
    if (occurrences_[static_cast<std::size_t>(o)].polarity == Polarity::Safe) {
      const double m = compute_safe_big_m(resized, workspace_);
      for (int i = 0; i < resized.faces(); ++i) {
        auto t = position_terms(resized.A().row(i).transpose(), k, 1.0);
        t.push_back({b, m});
        model_.add_row(t, milp::Relation::LessEqual, resized.b()(i) - kEncodingMargin + m);
      }
    } else {
      const double m = compute_big_m(resized, workspace_);
      std::vector<milp::Term> card{{b, 1.0}};
      for (int i = 0; i < resized.faces(); ++i) {
        const int z = model_.add_binary();
        auto t = position_terms(resized.A().row(i).transpose(), k, 1.0);
        t.push_back({z, m});
        model_.add_row(t, milp::Relation::GreaterEqual, resized.b()(i) + kEncodingMargin);
        card.push_back({z, 1.0});
      }
      model_.add_row(card, milp::Relation::LessEqual, static_cast<double>(resized.faces()));
    }
    leaf_indicators_.emplace(key, b);
    return b;
  }

  LinearSystem system_;
  Box workspace_;
  Formula nnf_;
  int n_steps_ = 0;
  double rho_ = 0.0;
  Vector x0_;
  Vector weights_;
  std::vector<PredicateOccurrence> occurrences_;
  std::vector<Predicate> base_;
  milp::Model model_;
  std::vector<std::vector<int>> x_, u_, s_;
  std::vector<std::vector<RowGroup>> groups_;
  std::vector<double> big_m_;
  bool full_ = false;
  std::map<std::pair<const Formula*, int>, int> indicators_;
  std::map<std::pair<int, int>, int> leaf_indicators_;
};

}  // namespace mtlsynth
