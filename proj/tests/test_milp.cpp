#include <gtest/gtest.h>

#include <random>

#include "mtlsynth/milp.hpp"
#include "mtlsynth/predicate.hpp"
#include "random_model.hpp"

using namespace mtlsynth;
using namespace mtlsynth::milp;

TEST(Lp, LowerBoundBinds) {
  Model m;
  const int x = m.add_variable(-kInf, kInf);
  m.add_row({{x, 1}}, Relation::GreaterEqual, 3);
  m.add_row({{x, 1}}, Relation::LessEqual, 10);
  m.set_objective({{x, 1}});
  const Solution s = solve_lp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.values[0], 3.0, 1e-12);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
}

TEST(Lp, SimplexFacet) {
  Model m;
  const int x = m.add_variable(0, kInf);
  const int y = m.add_variable(0, kInf);
  m.add_row({{x, 1}, {y, 1}}, Relation::LessEqual, 1);
  m.set_objective({{x, -1}, {y, -1}});
  const Solution s = solve_lp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, -1.0, 1e-12);
  EXPECT_NEAR(s.values[0] + s.values[1], 1.0, 1e-12);
}

TEST(Lp, Infeasible) {
  Model m;
  const int x = m.add_variable(-kInf, kInf);
  m.add_row({{x, 1}}, Relation::LessEqual, 0);
  m.add_row({{x, 1}}, Relation::GreaterEqual, 1);
  EXPECT_EQ(solve_lp(m).status, Status::Infeasible);
}

TEST(Lp, Unbounded) {
  Model m;
  const int x = m.add_variable(-kInf, kInf);
  const int y = m.add_variable(0, 1);
  m.add_row({{x, 1}, {y, 1}}, Relation::LessEqual, 4);
  m.set_objective({{x, 1}});
  EXPECT_EQ(solve_lp(m).status, Status::Unbounded);
}

TEST(Lp, EqualityRowsAndFreeVariables) {
  Model m;
  const int x = m.add_variable(-kInf, kInf);
  const int y = m.add_variable(-kInf, kInf);
  const int z = m.add_variable(0, 2);
  m.add_row({{x, 1}, {y, -1}}, Relation::Equal, 1);
  m.add_row({{y, 1}, {z, 2}}, Relation::Equal, 3);
  m.set_objective({{x, 1}});
  const Solution s = solve_lp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  // x = y + 1 = 4 - 2z, minimized at z = 2.
  EXPECT_NEAR(s.objective, 0.0, 1e-12);
  EXPECT_NEAR(s.values[static_cast<std::size_t>(z)], 2.0, 1e-12);
}

TEST(Lp, DualityCertificateOnRandomModels) {
  std::mt19937 rng(31);
  int optimal = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 20)(rng);
    const int rows = std::uniform_int_distribution<int>(1, 20)(rng);
    Model m = testing_support::random_milp(rng, n, 0, rows);
    const Solution s = solve_lp(m);
    if (s.status != Status::Optimal) {
      EXPECT_EQ(s.status, Status::Infeasible);
      continue;
    }
    ++optimal;
    EXPECT_LE(m.max_violation(s.values), 1e-7);
    EXPECT_NEAR(m.objective_value(s.values), s.objective, 1e-7);
    EXPECT_NEAR(testing_support::dual_bound(m, s.row_duals), s.objective, 1e-7);
  }
  EXPECT_GT(optimal, 200);
}

TEST(Lp, Deterministic) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Model base = testing_support::random_milp(rng, 12, 0, 10);
    Model a = base;
    Model b = base;
    const Solution sa = solve_lp(a);
    const Solution sb = solve_lp(b);
    EXPECT_EQ(sa.status, sb.status);
    EXPECT_EQ(sa.values, sb.values);
  }
}

TEST(Milp, RoundingForced) {
  Model m;
  const int z = m.add_binary();
  m.add_row({{z, 1}}, Relation::GreaterEqual, 0.5);
  m.set_objective({{z, 1}});
  const Solution s = solve_milp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_EQ(s.values[0], 1.0);
}

TEST(Milp, Knapsack) {
  Model m;
  const int a = m.add_binary();
  const int b = m.add_binary();
  m.add_row({{a, 1}, {b, 1}}, Relation::LessEqual, 1);
  m.set_objective({{a, -2}, {b, -3}});
  const Solution s = solve_milp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(-s.objective, 3.0, 1e-12);
  EXPECT_EQ(s.values[static_cast<std::size_t>(b)], 1.0);
  EXPECT_EQ(s.values[static_cast<std::size_t>(a)], 0.0);
}

TEST(Milp, InfeasibleIntegerProgram) {
  Model m;
  const int a = m.add_binary();
  const int b = m.add_binary();
  m.add_row({{a, 1}, {b, 1}}, Relation::Equal, 1);
  m.add_row({{a, 1}, {b, -1}}, Relation::Equal, 0);
  EXPECT_EQ(solve_milp(m).status, Status::Infeasible);
}

TEST(Milp, MatchesEnumerationOracle) {
  std::mt19937 rng(1234);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int nc = std::uniform_int_distribution<int>(1, 20)(rng);
    const int nb = std::uniform_int_distribution<int>(1, 10)(rng);
    const int rows = std::uniform_int_distribution<int>(2, 14)(rng);
    const Model base = testing_support::random_milp(rng, nc, nb, rows);
    Model m = base;
    const Solution s = solve_milp(m);
    const auto oracle = testing_support::enumerate_binaries(base);
    if (!oracle.feasible) {
      EXPECT_EQ(s.status, Status::Infeasible) << "trial " << trial;
      continue;
    }
    ++feasible;
    ASSERT_EQ(s.status, Status::Optimal) << "trial " << trial;
    EXPECT_NEAR(s.objective, oracle.objective, 1e-7) << "trial " << trial;
    EXPECT_LE(base.max_violation(s.values), 1e-6);
  }
  EXPECT_GT(feasible, 100);
}

TEST(Milp, DeadlineReportsBudget) {
  std::mt19937 rng(8);
  Model m = testing_support::random_milp(rng, 20, 10, 14);
  const Solution s = solve_milp(m, Clock::now());
  EXPECT_EQ(s.status, Status::BudgetExceeded);
}

TEST(Activation, DeactivatingBindingRow) {
  Model m;
  const int x = m.add_variable(0, kInf);
  const int r = m.add_row({{x, 1}}, Relation::GreaterEqual, 3);
  m.set_objective({{x, 1}});
  EXPECT_NEAR(solve_lp(m).values[0], 3.0, 1e-12);
  m.set_row_active(r, false);
  const Solution s = solve_lp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.values[0], 0.0, 1e-12);
}

TEST(Activation, ActivatingInfeasibleRow) {
  Model m;
  const int x = m.add_variable(0, 1);
  const int r = m.add_row({{x, 1}}, Relation::GreaterEqual, 2, /*active=*/false);
  EXPECT_EQ(solve_lp(m).status, Status::Optimal);
  m.set_row_active(r, true);
  EXPECT_EQ(solve_lp(m).status, Status::Infeasible);
}

TEST(Activation, ToggleIsIdempotent) {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    Model m = testing_support::random_milp(rng, 8, 4, 8);
    const Solution first = solve_milp(m);
    m.set_row_active(0, false);
    solve_milp(m);
    m.set_row_active(0, true);
    const Solution again = solve_milp(m);
    EXPECT_EQ(first.status, again.status);
    if (first.status == Status::Optimal) {
      EXPECT_NEAR(first.objective, again.objective, 1e-9);
    }
  }
}

TEST(Activation, EqualsFreshModelWithActiveRowsOnly) {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    Model m = testing_support::random_milp(rng, 10, 5, 12);
    Model fresh;
    for (const auto& v : m.variables()) fresh.add_variable(v.lower, v.upper, v.kind);
    std::bernoulli_distribution keep(0.6);
    for (int i = 0; i < m.num_rows(); ++i) {
      const bool active = keep(rng);
      m.set_row_active(i, active);
      if (active) fresh.add_row(m.row(i).terms, m.row(i).relation, m.row(i).rhs);
    }
    std::vector<Term> obj;
    for (int j = 0; j < m.num_variables(); ++j) obj.push_back({j, m.objective()[static_cast<std::size_t>(j)]});
    fresh.set_objective(obj);
    const Solution a = solve_milp(m);
    const Solution b = solve_milp(fresh);
    ASSERT_EQ(a.status, b.status);
    if (a.status == Status::Optimal) {
      EXPECT_NEAR(a.objective, b.objective, 1e-7);
    }
  }
}

TEST(Activation, UnknownRowRejected) {
  Model m;
  EXPECT_THROW(m.set_row_active(3, true), ModelError);
  EXPECT_THROW(m.update_row(0, {}, 1.0), ModelError);
  m.add_variable(0, 1);
  EXPECT_THROW(m.add_row({{5, 1.0}}, Relation::LessEqual, 1), ModelError);
}

TEST(UpdateRow, ShiftMakesPointFeasible) {
  Model m;
  const int x = m.add_variable(1.5, 1.5);
  const int r = m.add_row({{x, 1}}, Relation::LessEqual, 1);
  EXPECT_EQ(solve_lp(m).status, Status::Infeasible);
  m.update_row(r, {{x, 1}}, 2);
  EXPECT_EQ(solve_lp(m).status, Status::Optimal);
}

TEST(UpdateRow, NoOpUpdateKeepsSolution) {
  std::mt19937 rng(5);
  Model m = testing_support::random_milp(rng, 10, 4, 10);
  const Solution a = solve_milp(m);
  m.update_row(1, m.row(1).terms, m.row(1).rhs);
  const Solution b = solve_milp(m);
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(a.values, b.values);
}

namespace {

/// Point x fixed, unsafe group A x + M z >= b, sum z <= f - 1.
Model outside_model(const Predicate& p, const Vector& x, double big_m) {
  Model m;
  std::vector<int> xs;
  for (Eigen::Index d = 0; d < x.size(); ++d) xs.push_back(m.add_variable(x(d), x(d)));
  std::vector<Term> card;
  for (int i = 0; i < p.faces(); ++i) {
    const int z = m.add_binary();
    std::vector<Term> terms{{z, big_m}};
    for (Eigen::Index d = 0; d < x.size(); ++d) terms.push_back({xs[static_cast<std::size_t>(d)], p.A()(i, d)});
    m.add_row(terms, Relation::GreaterEqual, p.b()(i));
    card.push_back({z, 1.0});
  }
  m.add_row(card, Relation::LessEqual, p.faces() - 1);
  return m;
}

}  // namespace

TEST(BigM, UnitSquareMembership) {
  const Predicate sq = rectangle("sq", {0, 0}, {1, 1}, 2);
  Model inside = outside_model(sq, Vector{{0.5, 0.5}}, 20);
  EXPECT_EQ(solve_milp(inside).status, Status::Infeasible);
  EXPECT_FALSE(testing_support::enumerate_binaries(outside_model(sq, Vector{{0.5, 0.5}}, 20)).feasible);
  Model outside = outside_model(sq, Vector{{2, 0.5}}, 20);
  EXPECT_EQ(solve_milp(outside).status, Status::Optimal);
  EXPECT_TRUE(testing_support::enumerate_binaries(outside_model(sq, Vector{{2, 0.5}}, 20)).feasible);
}

TEST(LpFormat, ListsActiveRowsAndBinaries) {
  Model m;
  const int x = m.add_variable(0, 4, VarKind::Continuous, "x");
  const int z = m.add_binary("z");
  m.add_row({{x, 1}, {z, -2.5}}, Relation::LessEqual, 1, true, "c0");
  m.add_row({{x, 1}}, Relation::GreaterEqual, 3, false, "c1");
  m.set_objective({{x, 1}});
  const std::string lp = to_lp_format(m);
  EXPECT_NE(lp.find("Minimize\n obj: x\n"), std::string::npos) << lp;
  EXPECT_NE(lp.find(" c0: x - 2.5 z <= 1\n"), std::string::npos) << lp;
  EXPECT_EQ(lp.find("c1"), std::string::npos);
  EXPECT_NE(lp.find(" 0 <= x <= 4\n"), std::string::npos);
  EXPECT_NE(lp.find("Binaries\n z\n"), std::string::npos);
  EXPECT_NE(to_lp_format(m, true).find("\\ inactive c1: x >= 3\n"), std::string::npos);
}

TEST(Backend, BuiltinSolvesLoadedModel) {
  Model m;
  const int z = m.add_binary();
  m.set_objective({{z, -1}});
  auto backend = make_default_backend();
  EXPECT_EQ(backend->name(), "builtin");
  backend->load(m);
  const Solution s = backend->solve({});
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_EQ(s.values[0], 1.0);
}
