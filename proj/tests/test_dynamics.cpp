#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>
#include <sstream>

#include "mtlsynth/dynamics.hpp"
#include "mtlsynth/scenario_io.hpp"

using namespace mtlsynth;

namespace {

/// Exact discretization from the matrix exponential of [[A, B], [0, 0]] dt.
std::pair<Matrix, Matrix> zoh_by_expm(const Matrix& ac, const Matrix& bc, double dt) {
  const auto n = ac.rows();
  const auto m = bc.cols();
  Matrix big = Matrix::Zero(n + m, n + m);
  big.topLeftCorner(n, n) = ac;
  big.topRightCorner(n, m) = bc;
  const Matrix e = (big * dt).exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

}  // namespace

TEST(DoubleIntegrator, ZeroOrderHoldStep) {
  const LinearSystem s = double_integrator_2d(0.5);
  Vector x = Vector::Zero(4);
  Vector u(2);
  u << 1.0, 0.0;
  const Vector x1 = s.step(x, u);
  EXPECT_DOUBLE_EQ(x1(0), 0.125);
  EXPECT_DOUBLE_EQ(x1(1), 0.0);
  EXPECT_DOUBLE_EQ(x1(2), 0.5);
  EXPECT_DOUBLE_EQ(x1(3), 0.0);
}

TEST(DoubleIntegrator, MatchesMatrixExponential) {
  Matrix ac = Matrix::Zero(4, 4);
  ac(0, 2) = 1.0;
  ac(1, 3) = 1.0;
  Matrix bc = Matrix::Zero(4, 2);
  bc(2, 0) = 1.0;
  bc(3, 1) = 1.0;
  for (double dt : {0.1, 0.5, 1.0, 2.5}) {
    const auto [ad, bd] = zoh_by_expm(ac, bc, dt);
    const LinearSystem s = double_integrator_2d(dt);
    EXPECT_LT((s.A - ad).cwiseAbs().maxCoeff(), 1e-12) << dt;
    EXPECT_LT((s.B - bd).cwiseAbs().maxCoeff(), 1e-12) << dt;
  }
}

TEST(DoubleIntegrator, RolloutAndBounds) {
  const LinearSystem s = double_integrator_2d(0.5, 2.0);
  EXPECT_EQ(s.n(), 4);
  EXPECT_EQ(s.m(), 2);
  EXPECT_DOUBLE_EQ(s.u_hi(1), 2.0);
  EXPECT_DOUBLE_EQ(s.u_lo(0), -2.0);
  std::vector<Vector> inputs(3, Vector::Ones(2));
  const auto xs = s.rollout(Vector::Zero(4), inputs);
  ASSERT_EQ(xs.size(), 4u);
  EXPECT_NEAR(xs[3](0), 0.5 * 1.5 * 1.5, 1e-12);
  EXPECT_NEAR(xs[3](2), 1.5, 1e-12);
  EXPECT_THROW(double_integrator_2d(0.0), DimensionError);
}

TEST(LinearSystem, ValidateRejectsMismatch) {
  LinearSystem s = double_integrator_2d(0.5);
  s.B = Matrix::Zero(3, 2);
  EXPECT_THROW(s.validate(), DimensionError);
  s = double_integrator_2d(0.5);
  s.u_lo = Vector::Zero(3);
  EXPECT_THROW(s.validate(), DimensionError);
  s = double_integrator_2d(0.5);
  s.u_lo = Vector::Constant(2, 1.0);
  s.u_hi = Vector::Constant(2, -1.0);
  EXPECT_THROW(s.validate(), DimensionError);
}

TEST(FeedbackLinearization, Examples) {
  auto c = feedback_linearize({0, 0, 0, 1.0}, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(c.vdot, 1.0);
  EXPECT_DOUBLE_EQ(c.omega, 0.0);
  c = feedback_linearize({0, 0, 0, 2.0}, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(c.vdot, 0.0);
  EXPECT_DOUBLE_EQ(c.omega, 0.5);
  c = feedback_linearize({0, 0, M_PI / 2, 1.0}, 1.0, 0.0);
  EXPECT_NEAR(c.vdot, 0.0, 1e-15);
  EXPECT_NEAR(c.omega, -1.0, 1e-15);
  EXPECT_THROW(feedback_linearize({0, 0, 0, 0.0}, 1.0, 0.0), SingularityError);
  EXPECT_THROW(feedback_linearize({0, 0, 0, 5e-4}, 1.0, 0.0), SingularityError);
}

TEST(FeedbackLinearization, InvertsTheAccelerationMap) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const UnicycleState s{0, 0, d(rng), 0.1 + std::abs(d(rng))};
    const double ux = d(rng);
    const double uy = d(rng);
    const auto c = feedback_linearize(s, ux, uy);
    // Acceleration of (x, y) is R(theta) [vdot; v omega].
    const double ax = std::cos(s.theta) * c.vdot - std::sin(s.theta) * s.v * c.omega;
    const double ay = std::sin(s.theta) * c.vdot + std::cos(s.theta) * s.v * c.omega;
    EXPECT_NEAR(ax, ux, 1e-12);
    EXPECT_NEAR(ay, uy, 1e-12);
  }
}

TEST(Unicycle, WheelSpeeds) {
  const auto [vr, vl] = wheel_speeds(1.0, 2.0, 0.05);
  EXPECT_DOUBLE_EQ(vr, 1.1);
  EXPECT_DOUBLE_EQ(vl, 0.9);
  const auto [r0, l0] = wheel_speeds(0.3, 0.0, 0.05);
  EXPECT_DOUBLE_EQ(r0, l0);
}

TEST(Unicycle, StraightLine) {
  const std::vector<Vector> inputs(10, Vector::Zero(2));
  const auto trace = simulate_unicycle({0, 0, 0, 1.0}, inputs, 0.5);
  ASSERT_EQ(trace.at_indices.size(), 11u);
  EXPECT_NEAR(trace.at_indices.back().x, 5.0, 1e-12);
  EXPECT_NEAR(trace.at_indices.back().y, 0.0, 1e-12);
  EXPECT_NEAR(trace.at_indices.back().v, 1.0, 1e-12);
  EXPECT_EQ(trace.fine.size(), 10u * 20u + 1u);
  EXPECT_DOUBLE_EQ(trace.fine.back().t, 5.0);
}

TEST(Unicycle, ConstantAccelerationAlongHeading) {
  const double th = 0.7;
  Vector u(2);
  u << 0.4 * std::cos(th), 0.4 * std::sin(th);
  const std::vector<Vector> inputs(8, u);
  const auto trace = simulate_unicycle({1, 2, th, 0.5}, inputs, 0.5);
  const double t = 4.0;
  const double dist = 0.5 * t + 0.2 * t * t;
  EXPECT_NEAR(trace.at_indices.back().x, 1 + dist * std::cos(th), 1e-10);
  EXPECT_NEAR(trace.at_indices.back().y, 2 + dist * std::sin(th), 1e-10);
  EXPECT_NEAR(trace.at_indices.back().theta, th, 1e-12);
}

TEST(Unicycle, CircleUnderCentripetalInput) {
  // A circular arc needs an input that rotates with the heading, which a
  // piecewise-constant input only approximates; with dt small the unicycle
  // still reproduces the double-integrator rollout of the same inputs.
  const double r = 2.0;
  const double v = 1.0;
  const double dt = 0.05;
  LinearSystem s = double_integrator_2d(dt);
  std::vector<Vector> inputs;
  Vector x(4);
  x << r, 0.0, 0.0, v;
  std::vector<Vector> xs{x};
  for (int k = 0; k < 120; ++k) {
    const double ang = std::atan2(xs.back()(1), xs.back()(0));
    Vector u(2);
    u << -v * v / r * std::cos(ang), -v * v / r * std::sin(ang);
    inputs.push_back(u);
    xs.push_back(s.step(xs.back(), u));
  }
  const auto trace = simulate_unicycle(unicycle_from_double_integrator(xs[0]), inputs, dt);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    EXPECT_NEAR(trace.at_indices[k].x, xs[k](0), 1e-9);
    EXPECT_NEAR(trace.at_indices[k].y, xs[k](1), 1e-9);
  }
  EXPECT_NEAR(std::hypot(xs.back()(0), xs.back()(1)), r, 0.1);
}

TEST(Unicycle, TracksRandomDoubleIntegratorPlans) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const LinearSystem s = double_integrator_2d(0.5);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x0(4);
    x0 << d(rng), d(rng), 1.0, 0.5 * d(rng);
    std::vector<Vector> inputs;
    for (int k = 0; k < 20; ++k) {
      Vector u(2);
      u << 0.3 * d(rng), 0.3 * d(rng);
      inputs.push_back(u);
    }
    const auto xs = s.rollout(x0, inputs);
    bool slow = false;
    for (const auto& x : xs) slow = slow || std::hypot(x(2), x(3)) < 0.2;
    if (slow) continue;
    const auto trace = simulate_unicycle(unicycle_from_double_integrator(x0), inputs, 0.5);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      EXPECT_LT(std::hypot(trace.at_indices[k].x - xs[k](0), trace.at_indices[k].y - xs[k](1)), 1e-6);
    }
  }
}

TEST(Unicycle, RejectsTooFewSubsteps) {
  EXPECT_THROW(simulate_unicycle({0, 0, 0, 1}, {Vector::Zero(2)}, 0.5, 5), Error);
}

TEST(Unicycle, SingularityPropagates) {
  Vector u(2);
  u << -1.0, 0.0;
  // Decelerates through zero speed within the first interval.
  EXPECT_THROW(simulate_unicycle({0, 0, 0, 0.2}, {u}, 0.5), SingularityError);
}

TEST(TrajectoryCsv, FormatAndRoundTrip) {
  const LinearSystem s = double_integrator_2d(0.5);
  std::vector<Vector> inputs{Vector::Constant(2, 0.1), Vector::Constant(2, -1.0 / 3.0)};
  Vector x0(4);
  x0 << 1.0, 2.0, 0.1, 0.0;
  const auto xs = s.rollout(x0, inputs);
  std::ostringstream os;
  write_trajectory_csv(os, xs, inputs, 0.5);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,t,x,y,vx,vy,ux,uy");
  EXPECT_NE(text.find("\n2,1,"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 3), ",,\n");
  std::istringstream in(text);
  const TrajectoryCsv back = read_trajectory_csv(in);
  ASSERT_EQ(back.states.size(), xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_EQ(back.states[k], xs[k]);
  ASSERT_EQ(back.inputs.size(), inputs.size());
  EXPECT_EQ(back.inputs[1], inputs[1]);
  EXPECT_DOUBLE_EQ(back.dt, 0.5);
}

TEST(TrajectoryCsv, ReaderErrors) {
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(read_trajectory_csv(bad_header), Error);
  std::istringstream bad_number("k,t,x,y,vx,vy,ux,uy\n0,0,1,zz,0,0,,\n");
  EXPECT_THROW(read_trajectory_csv(bad_number), Error);
  std::istringstream short_row("k,t,x,y,vx,vy,ux,uy\n0,0,1,2\n");
  EXPECT_THROW(read_trajectory_csv(short_row), Error);
}

TEST(UnicycleCsv, Header) {
  const auto trace = simulate_unicycle({0, 0, 0, 1.0}, {Vector::Zero(2)}, 0.5);
  std::ostringstream os;
  write_unicycle_csv(os, trace);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,x,y,theta,v,omega,vr,vl");
}
