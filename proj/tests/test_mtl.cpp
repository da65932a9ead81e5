#include <gtest/gtest.h>

#include <random>

#include "mtlsynth/mtl.hpp"
#include "random_formula.hpp"

using namespace mtlsynth;

namespace {

Interval iv(double a, double b) { return {a, b}; }

}  // namespace

TEST(Parse, ReachAvoidPhi1) {
  const Formula f = parse("(G !unsafe) & (G[8.5,10] goal)");
  const Formula expected = Formula::conj({Formula::globally(Interval::unbounded(), Formula::negate(Formula::pred("unsafe"))),
                                          Formula::globally(iv(8.5, 10), Formula::pred("goal"))});
  EXPECT_EQ(f, expected);
}

TEST(Parse, NestedEventuallyGlobally) {
  const Formula f = parse("(G !unsafe) & F[5.5,7.5] (G[0,1.5] goal)");
  ASSERT_EQ(f.op, Op::And);
  ASSERT_EQ(f.args.size(), 2u);
  const Formula& ev = f.args[1];
  EXPECT_EQ(ev.op, Op::Eventually);
  EXPECT_EQ(ev.interval, iv(5.5, 7.5));
  EXPECT_EQ(ev.args[0].op, Op::Globally);
  EXPECT_EQ(ev.args[0].interval, iv(0, 1.5));
  EXPECT_EQ(ev.args[0].args[0], Formula::pred("goal"));
}

TEST(Parse, SinglePredicate) { EXPECT_EQ(parse("p"), Formula::pred("p")); }

TEST(Parse, PrecedenceAndAssociativity) {
  // & binds tighter than |, -> is weakest and right-associative.
  const Formula f = parse("a | b & c -> d -> e");
  ASSERT_EQ(f.op, Op::Implies);
  EXPECT_EQ(f.args[0], Formula::disj({Formula::pred("a"), Formula::conj({Formula::pred("b"), Formula::pred("c")})}));
  EXPECT_EQ(f.args[1], Formula::implies(Formula::pred("d"), Formula::pred("e")));
}

TEST(Parse, UntilAndWhitespace) {
  const Formula f = parse("  ( a  U [ 0 , 2 ]\n  b )");
  EXPECT_EQ(f, Formula::until(iv(0, 2), Formula::pred("a"), Formula::pred("b")));
}

TEST(Parse, IdentifiersStartingWithOperatorLetters) {
  EXPECT_EQ(parse("Goal & Final & Unsafe"),
            Formula::conj({Formula::pred("Goal"), Formula::pred("Final"), Formula::pred("Unsafe")}));
}

TEST(Parse, ReportsLineAndColumn) {
  try {
    parse("G goal &\n  & x");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 3);
  }
}

TEST(Parse, RejectsBadIntervals) {
  EXPECT_THROW(parse("G[-1,2] p"), ParseError);
  EXPECT_THROW(parse("F[3,2] p"), ParseError);
  EXPECT_THROW(parse("(a U b)"), ParseError);
  EXPECT_THROW(parse("G[1,2 p"), ParseError);
  EXPECT_THROW(parse("p q"), ParseError);
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("p $ q"), ParseError);
}

TEST(Parse, PrintedFormulaReparses) {
  for (const char* text : {"(G !unsafe) & (G[8.5,10] goal)", "(G !unsafe) & F[5.5,7.5] (G[0,1.5] goal)",
                           "!(a -> (b U[1,2] c)) | G[0,3] !d"}) {
    const Formula f = parse(text);
    EXPECT_EQ(parse(to_string(f)), f) << text;
  }
}

TEST(Nnf, Duality) {
  const Formula p = Formula::pred("p");
  const Formula q = Formula::pred("q");
  Formula expected = Formula::eventually(iv(1, 2), Formula::negate(p));
  expected.args[0].args[0].occurrence = 0;
  EXPECT_EQ(to_nnf(Formula::negate(Formula::globally(iv(1, 2), p))), expected);

  Formula dm = Formula::disj({Formula::negate(p), Formula::negate(q)});
  dm.args[0].args[0].occurrence = 0;
  dm.args[1].args[0].occurrence = 1;
  EXPECT_EQ(to_nnf(Formula::negate(Formula::conj({p, q}))), dm);

  Formula imp = Formula::disj({Formula::negate(p), q});
  imp.args[0].args[0].occurrence = 0;
  imp.args[1].occurrence = 1;
  EXPECT_EQ(to_nnf(Formula::implies(p, q)), imp);
}

TEST(Nnf, DoubleNegationAndNegatedEventually) {
  const Formula f = to_nnf(parse("!!p & !F[0,1] q"));
  EXPECT_TRUE(is_nnf(f));
  EXPECT_EQ(to_string(f), "(p & G[0,1] !q)");
}

TEST(Nnf, NegatedUntilIsUnsupported) {
  EXPECT_THROW(to_nnf(parse("!(a U[0,1] b)")), UnsupportedFragment);
  EXPECT_NO_THROW(to_nnf(parse("(a U[0,1] b)")));
}

TEST(Nnf, IdempotentOnRandomFormulas) {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    const Formula f = testing_support::random_formula(rng, 4, 3, /*allow_implies=*/true);
    Formula once;
    try {
      once = to_nnf(f);
    } catch (const UnsupportedFragment&) {
      continue;
    }
    EXPECT_TRUE(is_nnf(once));
    EXPECT_EQ(to_nnf(once), once);
  }
}

TEST(Horizon, FixtureFormulas) {
  EXPECT_EQ(horizon(to_nnf(parse("(G !unsafe) & (G[8.5,10] goal)")), 0.5), 20);
  EXPECT_EQ(horizon(to_nnf(parse("(G !unsafe) & F[5.5,7.5] (G[0,1.5] goal)")), 0.5), 18);
  EXPECT_EQ(horizon(to_nnf(parse("p")), 0.5), 0);
  EXPECT_EQ(horizon(to_nnf(parse("(G !u1) & (G[17.5,20] goal)")), 0.5), 40);
}

TEST(Horizon, UntilAndErrors) {
  EXPECT_EQ(horizon(parse("(F[0,1] a U[0,2] G[0,3] b)"), 1.0), 5);
  EXPECT_THROW(horizon(parse("F p"), 0.5), UnsupportedFragment);
  EXPECT_THROW(horizon(parse("p"), 0.0), Error);
}

TEST(Horizon, MonotoneInUpperBounds) {
  std::mt19937 rng(11);
  for (int i = 0; i < 300; ++i) {
    Formula f;
    int before;
    try {
      f = to_nnf(testing_support::random_formula(rng, 4, 3, false));
      before = horizon(f, 0.5);
    } catch (const UnsupportedFragment&) {
      continue;
    }
    // Widen the first bounded interval found.
    std::vector<Formula*> stack{&f};
    while (!stack.empty()) {
      Formula* g = stack.back();
      stack.pop_back();
      if (g->is_temporal() && g->interval.bounded()) {
        g->interval.hi += 1.3;
        break;
      }
      for (auto& a : g->args) stack.push_back(&a);
    }
    EXPECT_GE(horizon(f, 0.5), before);
  }
}

TEST(Occurrences, Phi1) {
  const auto occ = classify_occurrences(to_nnf(parse("(G !unsafe) & (G[8.5,10] goal)")));
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0], (PredicateOccurrence{"unsafe", Polarity::Unsafe, 0}));
  EXPECT_EQ(occ[1], (PredicateOccurrence{"goal", Polarity::Safe, 1}));
}

TEST(Occurrences, SamePredicateBothPolarities) {
  const auto occ = classify_occurrences(to_nnf(parse("p & !p")));
  ASSERT_EQ(occ.size(), 2u);
  EXPECT_EQ(occ[0].polarity, Polarity::Safe);
  EXPECT_EQ(occ[1].polarity, Polarity::Unsafe);
  EXPECT_NE(occ[0].id, occ[1].id);
}

TEST(Occurrences, Phi3WithPlaceholder) {
  // The scenario conjoins the declared placeholder obstacle as G !unsafe2.
  const auto occ = classify_occurrences(to_nnf(parse("((G !unsafe1) & (G[17.5,20] goal)) & G !unsafe2")));
  ASSERT_EQ(occ.size(), 3u);
  EXPECT_EQ(occ[0], (PredicateOccurrence{"unsafe1", Polarity::Unsafe, 0}));
  EXPECT_EQ(occ[1], (PredicateOccurrence{"goal", Polarity::Safe, 1}));
  EXPECT_EQ(occ[2], (PredicateOccurrence{"unsafe2", Polarity::Unsafe, 2}));
}

TEST(Fragment, ConjunctiveGlobally) {
  EXPECT_TRUE(is_conjunctive_globally(to_nnf(parse("(G !unsafe) & (G[8.5,10] goal)"))));
  EXPECT_FALSE(is_conjunctive_globally(to_nnf(parse("(G !unsafe) & F[5.5,7.5] (G[0,1.5] goal)"))));
  EXPECT_FALSE(is_conjunctive_globally(to_nnf(parse("a | b"))));
}
