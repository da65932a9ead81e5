#include <gtest/gtest.h>

#include <random>

#include "mtlsynth/encoding.hpp"
#include "mtlsynth/milp.hpp"
#include "random_formula.hpp"
#include "scenario_support.hpp"

using namespace mtlsynth;
using testing_support::fixture;
using testing_support::planar_scenario;
using testing_support::rect;

namespace {

/// Does group (o, k) admit some binary assignment with x_k fixed to `x`?
/// Every row of the group is checked directly; binaries are enumerated.
bool group_feasible_at(const Encoding& enc, int o, int k, const Vector& x) {
  const RowGroup& g = enc.group(o, k);
  const milp::Model& m = enc.model();
  const int nb = static_cast<int>(g.binaries.size());
  for (int mask = 0; mask < (1 << nb); ++mask) {
    std::vector<double> value(static_cast<std::size_t>(m.num_variables()), 0.0);
    for (int d = 0; d < x.size(); ++d) value[static_cast<std::size_t>(enc.state_var(k, d))] = x(d);
    for (int i = 0; i < nb; ++i) value[static_cast<std::size_t>(g.binaries[static_cast<std::size_t>(i)])] = (mask >> i) & 1;
    bool ok = true;
    for (int r : g.rows) {
      const double act = m.row_activity(r, value);
      const milp::Row& row = m.row(r);
      if (act < row.lower() - 1e-12 || act > row.upper() + 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

int occurrence_of(const Encoding& enc, const std::string& name) {
  for (const auto& o : enc.occurrences()) {
    if (o.predicate == name) return o.id;
  }
  return -1;
}

}  // namespace

TEST(Encoding, Phi1Counts) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  const Encoding enc(s);
  EXPECT_EQ(enc.horizon(), 20);
  EXPECT_EQ(enc.num_state_vars(), 84);
  EXPECT_EQ(enc.num_input_vars(), 40);
  EXPECT_EQ(enc.num_slack_vars(), 40);
  EXPECT_EQ(enc.num_groups(), 42);
  EXPECT_EQ(enc.num_active_groups(), 0);
  EXPECT_EQ(enc.model().num_binaries(), 84);
  EXPECT_EQ(enc.model().num_variables(), 84 + 40 + 40 + 84);
  int safe_groups = 0;
  int unsafe_groups = 0;
  for (const auto& occ : enc.occurrences()) {
    for (int k = 0; k <= enc.horizon(); ++k) {
      const RowGroup& g = enc.group(occ.id, k);
      EXPECT_FALSE(g.active);
      for (int r : g.rows) EXPECT_FALSE(enc.model().row(r).active);
      if (occ.polarity == Polarity::Safe) {
        ++safe_groups;
        EXPECT_TRUE(g.binaries.empty());
        EXPECT_EQ(g.rows.size(), 4u);
      } else {
        ++unsafe_groups;
        EXPECT_EQ(g.binaries.size(), 4u);
        EXPECT_EQ(g.rows.size(), 5u);
      }
    }
  }
  EXPECT_EQ(safe_groups, 21);
  EXPECT_EQ(unsafe_groups, 21);
}

TEST(Encoding, DynamicsAndObjectiveRows) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  // With no predicate rows the optimum is the zero input.
  const milp::Solution sol = milp::solve_milp(enc.model());
  ASSERT_EQ(sol.status, milp::Status::Optimal);
  EXPECT_NEAR(sol.objective, 0.0, 1e-9);
  const auto inputs = enc.inputs_from(sol.values);
  const Trajectory t = enc.trajectory_from(inputs);
  for (int k = 0; k <= enc.horizon(); ++k) {
    for (int d = 0; d < 4; ++d) EXPECT_NEAR(sol.values[static_cast<std::size_t>(enc.state_var(k, d))], t.states[static_cast<std::size_t>(k)](d), 1e-7);
  }
  EXPECT_EQ(enc.model().variable(enc.state_var(0, 0)).lower, 1.0);
  EXPECT_EQ(enc.model().variable(enc.state_var(0, 0)).upper, 1.0);
  EXPECT_EQ(enc.model().variable(enc.state_var(3, 1)).upper, 6.0);
  EXPECT_EQ(enc.model().variable(enc.input_var(3, 1)).upper, 2.0);
}

TEST(BigM, ClosedFormExamples) {
  Box box{Vector::Zero(2), Vector::Constant(2, 10.0)};
  Matrix a(1, 2);
  a << 1.0, 0.0;
  Vector b(1);
  b << 1.0;
  EXPECT_DOUBLE_EQ(compute_big_m(Predicate::from_halfspaces("p", a, b), box), 2.0);
  a << -1.0, 0.0;
  b << 0.0;
  EXPECT_DOUBLE_EQ(compute_big_m(Predicate::from_halfspaces("p", a, b), box), 11.0);
  const double w = 3.5;
  Box sym{Vector::Constant(2, -w), Vector::Constant(2, w)};
  a << 0.0, 1.0;
  b << 0.0;
  EXPECT_DOUBLE_EQ(compute_big_m(Predicate::from_halfspaces("p", a, b), sym), w + 1.0);
  Box open{Vector::Zero(2), Vector::Constant(2, INFINITY)};
  EXPECT_THROW(compute_big_m(Predicate::from_halfspaces("p", a, b), open), GeometryError);
}

TEST(BigM, CoversEveryBoxPoint) {
  std::mt19937 rng(5);
  const Box box{Vector::Zero(2), Vector::Constant(2, 10.0)};
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    const Predicate p = testing_support::random_polygon(rng, "p", 2, 6, 5.0, 2.0);
    const double m = compute_big_m(p, box);
    for (int i = 0; i < 200; ++i) {
      Vector x(2);
      x << u(rng), u(rng);
      for (int f = 0; f < p.faces(); ++f) EXPECT_GE(p.A().row(f).dot(x) + m, p.b()(f) + 1.0 - 1e-9);
    }
  }
}

TEST(Encoding, EmptyResizedSafeSetIsRejected) {
  const Scenario s = planar_scenario("G[0,1] goal", {rect("goal", 5, 2, 6, 3)}, 0.5, 1, 1);
  EXPECT_THROW(Encoding enc(s), GeometryError);
  const Scenario ok = planar_scenario("G[0,1] goal", {rect("goal", 5, 2, 6.2, 3.2)}, 0.5, 1, 1);
  EXPECT_NO_THROW(Encoding enc(ok));
}

TEST(Encoding, ZeroRhoKeepsGeometry) {
  const Scenario s = planar_scenario("(G !unsafe) & (F[1,2] goal)", {rect("unsafe", 4, 2, 6, 4), rect("goal", 8, 2, 9, 3)}, 0.0, 1, 1);
  const Encoding enc(s);
  const auto orig = enc.original_geometry();
  const auto res = enc.resized_geometry();
  ASSERT_EQ(orig.size(), res.size());
  for (std::size_t o = 0; o < orig.size(); ++o) EXPECT_EQ(orig[o], res[o]);
}

TEST(Encoding, ActivateGoalAtSeventeen) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  const int goal = occurrence_of(enc, "goal");
  ASSERT_GE(goal, 0);
  enc.activate(goal, 17);
  EXPECT_TRUE(enc.is_active(goal, 17));
  EXPECT_EQ(enc.num_active_groups(), 1);
  const int rows_before = enc.model().num_active_rows();
  enc.activate(goal, 17);
  EXPECT_EQ(enc.model().num_active_rows(), rows_before);
  EXPECT_EQ(enc.num_active_groups(), 1);

  const milp::Solution sol = milp::solve_milp(enc.model());
  ASSERT_EQ(sol.status, milp::Status::Optimal);
  const Trajectory t = enc.trajectory_from(enc.inputs_from(sol.values));
  const Predicate shrunk = enc.resized_geometry()[static_cast<std::size_t>(goal)];
  EXPECT_TRUE(shrunk.contains(t.states[17], 1e-7));
  EXPECT_GE(predicate_robustness(t.states[17], enc.predicate_of(goal)), 0.5 - 1e-6);
  // The shrunk goal is tight at the optimum: some face is binding.
  EXPECT_LT((shrunk.b() - shrunk.A() * t.states[17]).minCoeff(), 1e-5);

  enc.deactivate(goal, 17);
  EXPECT_EQ(enc.num_active_groups(), 0);
  EXPECT_THROW(enc.activate(goal, 21), ModelError);
  EXPECT_THROW(enc.activate(7, 0), ModelError);
}

TEST(Encoding, UpdateTranslatesRows) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  const int goal = occurrence_of(enc, "goal");
  std::vector<milp::Row> before;
  for (int k = 0; k <= enc.horizon(); ++k) {
    for (int r : enc.group(goal, k).rows) before.push_back(enc.model().row(r));
  }
  Vector shift = Vector::Zero(4);
  shift(0) = 1.0;
  const Predicate moved = s.predicate("goal").translated(shift);
  enc.update_predicate("goal", moved);
  std::size_t i = 0;
  for (int k = 0; k <= enc.horizon(); ++k) {
    for (int f = 0; f < 4; ++f, ++i) {
      const milp::Row& row = enc.model().row(enc.group(goal, k).rows[static_cast<std::size_t>(f)]);
      EXPECT_NEAR(row.rhs, before[i].rhs + moved.A()(f, 0), 1e-12);
      ASSERT_EQ(row.terms.size(), before[i].terms.size());
      for (std::size_t t = 0; t < row.terms.size(); ++t) EXPECT_EQ(row.terms[t].coef, before[i].terms[t].coef);
    }
  }
  EXPECT_EQ(enc.predicate_of(goal), moved);
}

TEST(Encoding, IdenticalUpdateIsNoOp) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  enc.activate(0, 3);
  const auto rows = enc.model().rows();
  const double m = enc.big_m(0);
  enc.update_predicate("unsafe", s.predicate("unsafe"));
  enc.update_predicate("goal", s.predicate("goal"));
  ASSERT_EQ(enc.model().rows().size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    EXPECT_EQ(enc.model().rows()[r].rhs, rows[r].rhs);
    EXPECT_EQ(enc.model().rows()[r].active, rows[r].active);
    ASSERT_EQ(enc.model().rows()[r].terms.size(), rows[r].terms.size());
    for (std::size_t t = 0; t < rows[r].terms.size(); ++t) {
      EXPECT_EQ(enc.model().rows()[r].terms[t].var, rows[r].terms[t].var);
      EXPECT_EQ(enc.model().rows()[r].terms[t].coef, rows[r].terms[t].coef);
    }
  }
  EXPECT_EQ(enc.big_m(0), m);
}

TEST(Encoding, UpdateValidationLeavesModelUntouched) {
  const Scenario s = load_scenario(fixture("phi3.toml"));
  Encoding enc(s);
  const auto rows = enc.model().rows();
  const Predicate tri = Predicate::from_vertices_2d("unsafe2", {{1, 1}, {2, 1}, {1, 2}}, 4);
  EXPECT_THROW(enc.update_predicate("unsafe2", tri), GeometryError);
  EXPECT_THROW(enc.update_predicate("goal", rect("goal", 8, 4, 8.5, 4.5)), GeometryError);
  EXPECT_THROW(enc.update_predicate("nothing", rect("x", 1, 1, 2, 2)), ScenarioError);
  const Predicate flat = rectangle("unsafe2", {1, 1}, {2, 2}, 2);
  EXPECT_THROW(enc.update_predicate("unsafe2", flat), DimensionError);
  for (std::size_t r = 0; r < rows.size(); ++r) EXPECT_EQ(enc.model().rows()[r].rhs, rows[r].rhs);
}

TEST(Encoding, UpdateEnlargesBigM) {
  const Scenario s = load_scenario(fixture("phi3.toml"));
  Encoding enc(s);
  const int o = occurrence_of(enc, "unsafe2");
  const double before = enc.big_m(o);
  const Predicate far = rect("unsafe2", 30, 30, 31, 31);
  enc.update_predicate("unsafe2", far);
  EXPECT_GE(enc.big_m(o), compute_big_m(far.offset(0.5), enc.workspace()));
  EXPECT_GE(enc.big_m(o), before);
  enc.update_predicate("unsafe2", s.predicate("unsafe2"));
  EXPECT_GE(enc.big_m(o), compute_big_m(far.offset(0.5), enc.workspace()));
}

TEST(EncodingProperty, UnsafePointMembership) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> ux(0.0, 10.0);
  std::uniform_real_distribution<double> uy(0.0, 6.0);
  std::uniform_real_distribution<double> uv(-2.0, 2.0);
  int mismatches = 0;
  int inside = 0;
  for (int block = 0; block < 10; ++block) {
    std::mt19937 prng(static_cast<unsigned>(block));
    Predicate p = testing_support::random_polygon(prng, "obs", 4, 6, 2.0, 1.5);
    Vector shift = Vector::Zero(4);
    shift << 5.0, 3.0, 0.0, 0.0;
    p = p.translated(shift);
    Scenario sc = planar_scenario("G !obs", {p}, 0.3, 0.5, 0.5);
    sc.horizon_override = 10;
    const Encoding enc(sc);
    const Predicate bloated = p.offset(0.3);
    for (int i = 0; i < 100; ++i) {
      Vector x(4);
      x << ux(rng), uy(rng), uv(rng), uv(rng);
      const bool in = bloated.contains(x);
      inside += in ? 1 : 0;
      if (group_feasible_at(enc, 0, 1 + i % enc.horizon(), x) == in) ++mismatches;
    }
  }
  EXPECT_EQ(mismatches, 0);
  EXPECT_GT(inside, 20);
}

TEST(EncodingProperty, SafePointMembership) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ux(0.0, 10.0);
  std::uniform_real_distribution<double> uy(0.0, 6.0);
  int mismatches = 0;
  int inside = 0;
  for (int block = 0; block < 10; ++block) {
    std::mt19937 prng(static_cast<unsigned>(100 + block));
    Predicate p = testing_support::random_polygon(prng, "goal", 4, 7, 2.0, 2.5);
    Vector shift = Vector::Zero(4);
    shift << 5.0, 3.0, 0.0, 0.0;
    p = p.translated(shift);
    const Scenario s = planar_scenario("G[0,2] goal", {p}, 0.25, 0.5, 0.5);
    std::unique_ptr<Encoding> enc;
    try {
      enc = std::make_unique<Encoding>(s);
    } catch (const GeometryError&) {
      continue;
    }
    const Predicate shrunk = p.offset(-0.25);
    for (int i = 0; i < 100; ++i) {
      Vector x(4);
      x << ux(rng), uy(rng), 0.0, 0.0;
      const bool in = shrunk.contains(x);
      inside += in ? 1 : 0;
      if (group_feasible_at(*enc, 0, i % (enc->horizon() + 1), x) != in) ++mismatches;
    }
  }
  EXPECT_EQ(mismatches, 0);
  EXPECT_GT(inside, 20);
}

TEST(Encoding, FullEncodingActivatesRequiredGroups) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  const auto req = enc.required_groups();
  // unsafe at every index, goal at 17..20
  EXPECT_EQ(req.size(), 21u + 4u);
  enc.encode_full();
  EXPECT_TRUE(enc.is_full());
  EXPECT_EQ(enc.num_active_groups(), 25);
  for (const auto& a : req) EXPECT_TRUE(enc.is_active(a.occurrence, a.index));
  const int binaries = enc.model().num_binaries();
  enc.encode_full();
  EXPECT_EQ(enc.model().num_binaries(), binaries);
}

TEST(Encoding, FullEncodingOfDisjunctiveFormulaIsSound) {
  const Scenario s = load_scenario(fixture("phi2.toml"));
  Encoding enc(s);
  enc.encode_full();
  const milp::Solution sol = milp::solve_milp(enc.model());
  ASSERT_EQ(sol.status, milp::Status::Optimal);
  const Trajectory t = enc.trajectory_from(enc.inputs_from(sol.values));
  EXPECT_GE(evaluate(enc.formula(), t, enc.resized_geometry()).value, 0.0);
  EXPECT_THROW(enc.update_predicate("goal", s.predicate("goal")), ModelError);
}

TEST(Encoding, PinnedInputsFixPrefix) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  std::vector<Vector> prefix(3, Vector::Constant(2, 0.05));
  enc.pin_inputs(prefix, 3);
  const milp::Solution sol = milp::solve_milp(enc.model());
  ASSERT_EQ(sol.status, milp::Status::Optimal);
  const auto inputs = enc.inputs_from(sol.values);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(inputs[static_cast<std::size_t>(k)], prefix[0]);
  EXPECT_NEAR(sol.objective, 0.3, 1e-9);
  enc.pin_inputs(prefix, 0);
  EXPECT_NEAR(milp::solve_milp(enc.model()).objective, 0.0, 1e-9);
}

TEST(Encoding, LpDumpNamesRows) {
  const Scenario s = load_scenario(fixture("phi1.toml"));
  Encoding enc(s);
  enc.activate(0, 4);
  const std::string text = milp::to_lp_format(enc.model());
  EXPECT_NE(text.find("dyn_0_0"), std::string::npos);
  EXPECT_NE(text.find("unsafe_o0_k4_f0"), std::string::npos);
  EXPECT_NE(text.find("card_o0_k4"), std::string::npos);
  EXPECT_EQ(text.find("unsafe_o0_k5_f0"), std::string::npos);
}
