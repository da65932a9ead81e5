#pragma once

// LP relaxation and branch-and-bound entry points.

#include <algorithm>
#include <cmath>
#include <memory>
#include <queue>
#include <utility>
#include <vector>

#include "mtlsynth/milp/model.hpp"
#include "mtlsynth/milp/simplex.hpp"

namespace mtlsynth::milp {

struct MilpOptions {
  double gap = 1e-6;
  double feasibility_tol = 1e-7;
  double integrality_tol = 1e-6;
  long max_nodes = 2'000'000;
  SimplexOptions simplex;
};

namespace detail {

inline Status to_status(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return Status::Optimal;
    case LpStatus::Infeasible: return Status::Infeasible;
    case LpStatus::Unbounded: return Status::Unbounded;
    case LpStatus::Deadline: return Status::BudgetExceeded;
    case LpStatus::Numerical: return Status::NumericalFailure;
  }
  return Status::NumericalFailure;
}

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct BoundChange {
  int var;
  double lower;
  double upper;
};

struct Node {
  double bound;
  int depth;
  long id;
  long parent;
  std::vector<BoundChange> changes;
  std::shared_ptr<const Basis> basis;
};

/// Best bound first, deeper first on ties, then creation order.
struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id > b.id;
  }
};

/// Column view of the active rows, used by the rounding heuristic.
struct ActiveColumns {
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> lo, hi;

  explicit ActiveColumns(const Model& model) : cols(static_cast<std::size_t>(model.num_variables())) {
    for (int i = 0; i < model.num_rows(); ++i) {
      const Row& r = model.row(i);
      if (!r.active) continue;
      const int k = static_cast<int>(lo.size());
      lo.push_back(r.lower());
      hi.push_back(r.upper());
      for (const auto& t : r.terms) cols[static_cast<std::size_t>(t.var)].push_back({k, t.coef});
    }
  }

  std::vector<double> activities(const Model& model, const std::vector<double>& x) const {
    std::vector<double> act(lo.size(), 0.0);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (const auto& [k, a] : cols[j]) act[static_cast<std::size_t>(k)] += a * x[j];
    }
    (void)model;
    return act;
  }
};

/// Shifts fractional binaries to integers while every touched row stays
/// feasible (ZI rounding). Returns the binaries that could not be shifted.
inline std::vector<int> zi_round(const Model& model, const ActiveColumns& ac, std::vector<double>& x,
                                 const std::vector<int>& fractional, double tol) {
  std::vector<double> act = ac.activities(model, x);
  std::vector<int> pending = fractional;
  bool progress = true;
  while (progress && !pending.empty()) {
    progress = false;
    std::vector<int> still;
    for (int j : pending) {
      const double v = x[static_cast<std::size_t>(j)];
      const double nearest = std::round(v);
      bool done = false;
      for (double target : {nearest, 1.0 - nearest}) {
        const double step = target - v;
        bool ok = true;
        for (const auto& [k, a] : ac.cols[static_cast<std::size_t>(j)]) {
          const double na = act[static_cast<std::size_t>(k)] + a * step;
          if (na < ac.lo[static_cast<std::size_t>(k)] - tol || na > ac.hi[static_cast<std::size_t>(k)] + tol) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        for (const auto& [k, a] : ac.cols[static_cast<std::size_t>(j)]) act[static_cast<std::size_t>(k)] += a * step;
        x[static_cast<std::size_t>(j)] = target;
        done = true;
        break;
      }
      if (done) {
        progress = true;
      } else {
        still.push_back(j);
      }
    }
    pending = std::move(still);
  }
  return pending;
}

}  // namespace detail

/// Solves the LP relaxation (binaries relaxed to [0, 1]).
inline Solution solve_lp(Model& model, Deadline deadline = {}, SimplexOptions options = {}) {
  const auto t0 = Clock::now();
  LpEngine engine(model, options);
  if (model.warm_basis()) engine.load_basis(*model.warm_basis());
  const LpStatus st = engine.solve(deadline);
  Solution sol;
  sol.status = detail::to_status(st);
  sol.stats.simplex_iterations = engine.iterations();
  if (st == LpStatus::Optimal) {
    sol.values = engine.primal();
    sol.objective = engine.objective();
    sol.row_duals = engine.row_duals(model.num_rows());
    model.set_warm_basis(engine.basis(model));
  }
  sol.stats.seconds = detail::seconds_since(t0);
  return sol;
}

/// Best-bound branch and bound over the binary variables. Optimal status is
/// reported only once the tree is exhausted within the absolute gap.
inline Solution solve_milp(Model& model, Deadline deadline = {}, MilpOptions options = {}) {
  using detail::Node;
  const auto t0 = Clock::now();
  Solution out;
  LpEngine engine(model, options.simplex);
  if (model.warm_basis()) engine.load_basis(*model.warm_basis());

  std::vector<int> binaries;
  for (int j = 0; j < model.num_variables(); ++j) {
    if (model.variable(j).kind == VarKind::Binary) binaries.push_back(j);
  }
  const detail::ActiveColumns columns(model);

  std::priority_queue<Node, std::vector<Node>, detail::NodeOrder> open;
  open.push(Node{-kInf, 0, 0, -1, {}, nullptr});
  long next_id = 1;
  long current = -1;  // node whose final basis the engine currently holds
  std::vector<double> incumbent;
  double incumbent_obj = kInf;
  bool budget_hit = false;
  bool root_solved = false;

  while (!open.empty()) {
    if (expired(deadline) || out.stats.nodes >= options.max_nodes) {
      budget_hit = true;
      break;
    }
    Node node = open.top();
    open.pop();
    if (node.bound >= incumbent_obj - options.gap) break;
    ++out.stats.nodes;

    engine.reset_bounds();
    for (const auto& c : node.changes) engine.set_bounds(c.var, c.lower, c.upper);
    if (node.parent != current && node.basis) engine.load_basis(*node.basis);
    const LpStatus st = engine.solve(deadline);
    current = node.id;

    if (st == LpStatus::Deadline) {
      budget_hit = true;
      break;
    }
    if (st == LpStatus::Numerical) {
      out.status = Status::NumericalFailure;
      out.stats.simplex_iterations = engine.iterations();
      out.stats.seconds = detail::seconds_since(t0);
      return out;
    }
    if (!root_solved) {
      root_solved = true;
      if (st == LpStatus::Optimal) model.set_warm_basis(engine.basis(model));
      if (st == LpStatus::Unbounded) {
        out.status = Status::Unbounded;
        out.stats.simplex_iterations = engine.iterations();
        out.stats.seconds = detail::seconds_since(t0);
        return out;
      }
    }
    if (st != LpStatus::Optimal) continue;
    const double obj = engine.objective();
    if (obj >= incumbent_obj - options.gap) continue;

    std::vector<double> x = engine.primal();
    std::vector<int> fractional;
    for (int j : binaries) {
      const double v = x[static_cast<std::size_t>(j)];
      if (std::abs(v - std::round(v)) > options.integrality_tol) fractional.push_back(j);
    }
    if (fractional.empty()) {
      incumbent = std::move(x);
      incumbent_obj = obj;
      continue;
    }

    std::vector<double> rounded = x;
    const std::vector<int> stuck = detail::zi_round(model, columns, rounded, fractional, options.feasibility_tol);
    if (stuck.empty()) {
      const double robj = model.objective_value(rounded);
      if (robj < incumbent_obj) {
        incumbent = std::move(rounded);
        incumbent_obj = robj;
      }
      if (obj >= incumbent_obj - options.gap) continue;
    }

    // Most fractional among the binaries rounding could not settle.
    const std::vector<int>& pool = stuck.empty() ? fractional : stuck;
    int branch = pool.front();
    double best = 1.0;
    for (int j : pool) {
      const double score = std::abs(x[static_cast<std::size_t>(j)] - 0.5);
      if (score < best) {
        best = score;
        branch = j;
      }
    }
    const auto basis = std::make_shared<const Basis>(engine.basis(model));
    const bool up_first = x[static_cast<std::size_t>(branch)] >= 0.5;
    for (int side = 0; side < 2; ++side) {
      const bool up = (side == 0) == up_first;
      Node child{obj, node.depth + 1, next_id++, node.id, node.changes, basis};
      child.changes.push_back({branch, up ? 1.0 : 0.0, up ? 1.0 : 0.0});
      open.push(std::move(child));
    }
  }

  out.stats.simplex_iterations = engine.iterations();
  if (incumbent.empty()) {
    out.status = budget_hit ? Status::BudgetExceeded : Status::Infeasible;
    out.stats.seconds = detail::seconds_since(t0);
    return out;
  }

  // Polish: pin binaries to their rounded values and re-solve the LP so the
  // continuous part is exact for the chosen combination.
  engine.reset_bounds();
  for (int j : binaries) {
    const double v = std::round(incumbent[static_cast<std::size_t>(j)]);
    engine.set_bounds(j, v, v);
  }
  if (engine.solve(deadline) == LpStatus::Optimal) {
    std::vector<double> x = engine.primal();
    for (int j : binaries) x[static_cast<std::size_t>(j)] = std::round(incumbent[static_cast<std::size_t>(j)]);
    const double obj = engine.objective();
    if (obj <= incumbent_obj + options.gap) {
      incumbent = std::move(x);
      incumbent_obj = obj;
    }
  }
  out.stats.simplex_iterations = engine.iterations();
  out.values = std::move(incumbent);
  out.objective = incumbent_obj;
  out.status = budget_hit ? Status::BudgetExceeded : Status::Optimal;
  out.stats.seconds = detail::seconds_since(t0);
  return out;
}

}  // namespace mtlsynth::milp
