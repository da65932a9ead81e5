#pragma once

// Planning and execution models: discrete LTI systems (double integrator),
// the unicycle under feedback linearization, and CSV writers for both.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"
#include "mtlsynth/predicate.hpp"

namespace mtlsynth {

/// x_{k+1} = A x_k + B u_k with box input bounds.
struct LinearSystem {
  Matrix A;
  Matrix B;
  double dt = 1.0;
  std::vector<std::string> state_labels;
  std::vector<std::string> input_labels;
  Vector u_lo;
  Vector u_hi;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  Vector step(const Vector& x, const Vector& u) const { return A * x + B * u; }

  void validate() const {
    if (!(dt > 0.0)) throw DimensionError("sample time must be positive");
    if (A.rows() != A.cols()) throw DimensionError("A must be square");
    if (B.rows() != A.rows()) throw DimensionError("B must have as many rows as A");
    if (u_lo.size() != B.cols() || u_hi.size() != B.cols()) throw DimensionError("input bounds do not match B");
    if (!state_labels.empty() && static_cast<int>(state_labels.size()) != n()) {
      throw DimensionError("state label count does not match A");
    }
    if (!input_labels.empty() && static_cast<int>(input_labels.size()) != m()) {
      throw DimensionError("input label count does not match B");
    }
    if (((u_hi - u_lo).array() < 0).any()) throw DimensionError("input lower bound exceeds upper bound");
  }

  /// Rolls the system forward from x0 under the given inputs.
  std::vector<Vector> rollout(const Vector& x0, const std::vector<Vector>& inputs) const {
    std::vector<Vector> xs{x0};
    for (const auto& u : inputs) xs.push_back(step(xs.back(), u));
    return xs;
  }
};

/// State (x, y, vx, vy), input (ux, uy), exact zero-order hold.
inline LinearSystem double_integrator_2d(double dt, double u_max = std::numeric_limits<double>::infinity()) {
  if (!(dt > 0.0)) throw DimensionError("sample time must be positive");
  LinearSystem s;
  s.dt = dt;
  s.A = Matrix::Identity(4, 4);
  s.A(0, 2) = dt;
  s.A(1, 3) = dt;
  s.B = Matrix::Zero(4, 2);
  s.B(0, 0) = 0.5 * dt * dt;
  s.B(1, 1) = 0.5 * dt * dt;
  s.B(2, 0) = dt;
  s.B(3, 1) = dt;
  s.state_labels = {"x", "y", "vx", "vy"};
  s.input_labels = {"ux", "uy"};
  s.u_lo = Vector::Constant(2, -u_max);
  s.u_hi = Vector::Constant(2, u_max);
  return s;
}

struct UnicycleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
};

struct UnicycleControl {
  double vdot = 0.0;
  double omega = 0.0;
};

inline constexpr double kMinSpeed = 1e-3;

/// [vdot; v omega] = R(-theta) [ux; uy].
inline UnicycleControl feedback_linearize(const UnicycleState& s, double ux, double uy, double v_min = kMinSpeed) {
  if (std::abs(s.v) < v_min) {
    throw SingularityError("feedback linearization is singular at speed " + std::to_string(s.v));
  }
  const double c = std::cos(s.theta);
  const double sn = std::sin(s.theta);
  return {c * ux + sn * uy, (-sn * ux + c * uy) / s.v};
}

/// Right and left wheel speeds for half axle length d.
inline std::pair<double, double> wheel_speeds(double v, double omega, double d) {
  return {v + d * omega, v - d * omega};
}

struct UnicycleSample {
  double t = 0.0;
  UnicycleState state;
  double omega = 0.0;
  double v_right = 0.0;
  double v_left = 0.0;
};

struct UnicycleTrace {
  /// States at the planner indices 0..N.
  std::vector<UnicycleState> at_indices;
  /// Every substep, including both end points.
  std::vector<UnicycleSample> fine;
};

namespace detail {

inline UnicycleState unicycle_rate(const UnicycleState& s, double ux, double uy, double v_min) {
  const UnicycleControl c = feedback_linearize(s, ux, uy, v_min);
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), c.omega, c.vdot};
}

inline UnicycleState axpy(const UnicycleState& s, double h, const UnicycleState& k) {
  return {s.x + h * k.x, s.y + h * k.y, s.theta + h * k.theta, s.v + h * k.v};
}

}  // namespace detail

/// RK4 integration of the unicycle with the linearizing law, inputs held
/// constant over each planner interval.
inline UnicycleTrace simulate_unicycle(const UnicycleState& initial, const std::vector<Vector>& inputs, double dt,
                                       int substeps = 20, double axle_half_length = 0.05, double v_min = kMinSpeed) {
  if (substeps < 10) throw Error("unicycle simulation needs at least 10 substeps per interval");
  if (!(dt > 0.0)) throw DimensionError("sample time must be positive");
  const double h = dt / substeps;
  UnicycleTrace trace;
  UnicycleState s = initial;
  auto record = [&](double t, const UnicycleState& st, double ux, double uy) {
    const double omega = std::abs(st.v) >= v_min ? feedback_linearize(st, ux, uy, v_min).omega : 0.0;
    const auto [vr, vl] = wheel_speeds(st.v, omega, axle_half_length);
    trace.fine.push_back({t, st, omega, vr, vl});
  };
  trace.at_indices.push_back(s);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const double ux = inputs[k](0);
    const double uy = inputs[k](1);
    for (int j = 0; j < substeps; ++j) {
      const double t = static_cast<double>(k) * dt + j * h;
      record(t, s, ux, uy);
      const auto k1 = detail::unicycle_rate(s, ux, uy, v_min);
      const auto k2 = detail::unicycle_rate(detail::axpy(s, h / 2, k1), ux, uy, v_min);
      const auto k3 = detail::unicycle_rate(detail::axpy(s, h / 2, k2), ux, uy, v_min);
      const auto k4 = detail::unicycle_rate(detail::axpy(s, h, k3), ux, uy, v_min);
      s = {s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), s.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
           s.theta + h / 6 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta),
           s.v + h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v)};
    }
    trace.at_indices.push_back(s);
  }
  if (!inputs.empty()) record(static_cast<double>(inputs.size()) * dt, s, inputs.back()(0), inputs.back()(1));
  return trace;
}

/// Unicycle state matching a double-integrator state (x, y, vx, vy).
inline UnicycleState unicycle_from_double_integrator(const Vector& x) {
  return {x(0), x(1), std::atan2(x(3), x(2)), std::hypot(x(2), x(3))};
}

namespace detail {

inline std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Header `k,t,x,y,vx,vy,ux,uy`; the last row has no input.
inline void write_trajectory_csv(std::ostream& os, const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                                 double dt) {
  os << "k,t,x,y,vx,vy,ux,uy\n";
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Vector& x = states[k];
    if (x.size() != 4) throw DimensionError("trajectory CSV expects 4-dimensional states");
    os << k << ',' << detail::csv_number(static_cast<double>(k) * dt);
    for (int d = 0; d < 4; ++d) os << ',' << detail::csv_number(x(d));
    if (k < inputs.size()) {
      os << ',' << detail::csv_number(inputs[k](0)) << ',' << detail::csv_number(inputs[k](1));
    } else {
      os << ",,";
    }
    os << '\n';
  }
}

/// Header `t,x,y,theta,v,omega,vr,vl`.
inline void write_unicycle_csv(std::ostream& os, const UnicycleTrace& trace) {
  os << "t,x,y,theta,v,omega,vr,vl\n";
  for (const auto& s : trace.fine) {
    os << detail::csv_number(s.t) << ',' << detail::csv_number(s.state.x) << ',' << detail::csv_number(s.state.y)
       << ',' << detail::csv_number(s.state.theta) << ',' << detail::csv_number(s.state.v) << ','
       << detail::csv_number(s.omega) << ',' << detail::csv_number(s.v_right) << ','
       << detail::csv_number(s.v_left) << '\n';
  }
}

}  // namespace mtlsynth
