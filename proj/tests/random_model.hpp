#pragma once

// Random MILP instances and the enumeration oracle used by solver tests.

#include <cmath>
#include <random>
#include <vector>

#include "mtlsynth/milp.hpp"

namespace testing_support {

using namespace mtlsynth::milp;

/// Bounded mixed model: continuous vars in [-5, 5], binaries, mixed relations.
/// Row right-hand sides are built around a random reference point so most
/// instances are feasible.
inline Model random_milp(std::mt19937& rng, int continuous, int binaries, int rows) {
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  std::uniform_real_distribution<double> slack(-0.5, 3.0);
  std::bernoulli_distribution sparse(0.6);
  Model m;
  std::vector<double> ref;
  for (int j = 0; j < continuous; ++j) {
    const double a = box(rng);
    const double b = box(rng);
    m.add_variable(std::min(a, b), std::max(a, b));
    ref.push_back(0.5 * (a + b));
  }
  for (int j = 0; j < binaries; ++j) {
    m.add_binary();
    ref.push_back(std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0);
  }
  const int n = continuous + binaries;
  for (int i = 0; i < rows; ++i) {
    std::vector<Term> terms;
    double act = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!sparse(rng)) continue;
      const double a = std::round(coef(rng) * 4) / 4;
      terms.push_back({j, a});
      act += a * ref[static_cast<std::size_t>(j)];
    }
    if (terms.empty()) continue;
    const int kind = std::uniform_int_distribution<int>(0, 5)(rng);
    if (kind <= 2) {
      m.add_row(terms, Relation::LessEqual, act + slack(rng));
    } else if (kind <= 4) {
      m.add_row(terms, Relation::GreaterEqual, act - slack(rng));
    } else {
      m.add_row(terms, Relation::Equal, act);
    }
  }
  std::vector<Term> obj;
  for (int j = 0; j < n; ++j) obj.push_back({j, coef(rng)});
  m.set_objective(obj);
  return m;
}

/// Lower bound certified by row duals y: min c.x over l <= x <= u, lr <= Ax <= ur
/// is at least sum_i y_i * (lr_i or ur_i) + sum_j d_j * (l_j or u_j), d = c - A^T y.
inline double dual_bound(const Model& m, const std::vector<double>& y) {
  std::vector<double> d = m.objective();
  double bound = 0.0;
  for (int i = 0; i < m.num_rows(); ++i) {
    const Row& r = m.row(i);
    const double yi = r.active ? y[static_cast<std::size_t>(i)] : 0.0;
    if (yi == 0.0) continue;
    bound += yi * (yi > 0 ? r.lower() : r.upper());
    for (const auto& t : r.terms) d[static_cast<std::size_t>(t.var)] -= yi * t.coef;
  }
  for (int j = 0; j < m.num_variables(); ++j) {
    const double dj = d[static_cast<std::size_t>(j)];
    if (dj == 0.0) continue;
    bound += dj * (dj > 0 ? m.variable(j).lower : m.variable(j).upper);
  }
  return bound;
}

struct OracleResult {
  bool feasible = false;
  double objective = INFINITY;
};

/// Enumerates every binary assignment and solves the remaining LP.
inline OracleResult enumerate_binaries(const Model& model) {
  std::vector<int> bins;
  for (int j = 0; j < model.num_variables(); ++j) {
    if (model.variable(j).kind == VarKind::Binary) bins.push_back(j);
  }
  OracleResult best;
  for (unsigned mask = 0; mask < (1u << bins.size()); ++mask) {
    Model m = model;
    m.set_warm_basis(std::nullopt);
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const double v = (mask >> b) & 1u ? 1.0 : 0.0;
      m.set_bounds(bins[b], v, v);
    }
    const Solution s = solve_lp(m);
    if (s.status != Status::Optimal) continue;
    if (!best.feasible || s.objective < best.objective) best = {true, s.objective};
  }
  return best;
}

}  // namespace testing_support
