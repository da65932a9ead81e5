#pragma once

// Polyhedral predicates {x | A x <= b} with unit-norm face normals.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"
#include "mtlsynth/mtl.hpp"

namespace mtlsynth {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point2 = std::array<double, 2>;

/// Axis-aligned box over the full state space.
struct Box {
  Vector lo;
  Vector hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool bounded() const { return lo.allFinite() && hi.allFinite(); }
  bool contains(const Vector& x, double tol = 0.0) const {
    return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
  }
};

class Predicate {
public:
  Predicate() = default;

  /// Normalizes each row of A (and the matching entry of b) to unit length.
  static Predicate from_halfspaces(std::string name, Matrix a, Vector b) {
    if (a.rows() != b.size()) throw DimensionError("predicate '" + name + "': A and b row counts differ");
    if (a.rows() == 0) throw GeometryError("predicate '" + name + "' has no faces");
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double n = a.row(i).norm();
      if (!(n > 1e-12)) throw GeometryError("predicate '" + name + "' has a zero face normal");
      if (std::abs(n - 1.0) <= 4 * std::numeric_limits<double>::epsilon()) continue;
      a.row(i) /= n;
      b(i) /= n;
    }
    Predicate p;
    p.name_ = std::move(name);
    p.a_ = std::move(a);
    p.b_ = std::move(b);
    return p;
  }

  /// Convex hull of planar vertices, embedded in a state space of `state_dim`
  /// dimensions on the coordinates (dims[0], dims[1]).
  static Predicate from_vertices_2d(std::string name, std::vector<Point2> vertices, int state_dim,
                                    std::array<int, 2> dims = {0, 1});

  const std::string& name() const { return name_; }
  const Matrix& A() const { return a_; }
  const Vector& b() const { return b_; }
  int faces() const { return static_cast<int>(a_.rows()); }
  int dim() const { return static_cast<int>(a_.cols()); }

  bool contains(const Vector& x, double tol = 0.0) const { return ((a_ * x - b_).array() <= tol).all(); }

  /// b -> b + delta on every face (delta < 0 shrinks, delta > 0 bloats).
  Predicate offset(double delta) const {
    Predicate p = *this;
    p.b_.array() += delta;
    return p;
  }

  Predicate translated(const Vector& shift) const {
    Predicate p = *this;
    p.b_ += a_ * shift;
    return p;
  }

  /// Repeats the last face until there are `f` faces; the set is unchanged.
  Predicate padded_to(int f) const {
    if (f < faces()) throw GeometryError("predicate '" + name_ + "' has more than " + std::to_string(f) + " faces");
    Predicate p = *this;
    p.a_.conservativeResize(f, Eigen::NoChange);
    p.b_.conservativeResize(f);
    for (int i = faces(); i < f; ++i) {
      p.a_.row(i) = a_.row(faces() - 1);
      p.b_(i) = b_(faces() - 1);
    }
    return p;
  }

  Predicate renamed(std::string name) const {
    Predicate p = *this;
    p.name_ = std::move(name);
    return p;
  }

  friend bool operator==(const Predicate& x, const Predicate& y) {
    return x.name_ == y.name_ && x.a_.rows() == y.a_.rows() && x.a_.cols() == y.a_.cols() && x.a_ == y.a_ &&
           x.b_ == y.b_;
  }

private:
  std::string name_;
  Matrix a_;
  Vector b_;
};

/// min_i (b_i - a_i . x): positive inside, negative outside. Exact Euclidean
/// distance to the boundary for interior points, an under-estimate outside.
inline double predicate_robustness(const Vector& x, const Predicate& p) {
  if (x.size() != p.dim()) {
    throw DimensionError("state has dimension " + std::to_string(x.size()) + " but predicate '" + p.name() +
                         "' expects " + std::to_string(p.dim()));
  }
  return (p.b() - p.A() * x).minCoeff();
}

/// Safe occurrences shrink by rho, unsafe occurrences bloat by rho.
inline Predicate resize_for(const Predicate& p, Polarity polarity, double rho) {
  return p.offset(polarity == Polarity::Safe ? -rho : rho);
}

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Andrew's monotone chain; returns the hull counter-clockwise without collinear points.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace detail

inline Predicate Predicate::from_vertices_2d(std::string name, std::vector<Point2> vertices, int state_dim,
                                             std::array<int, 2> dims) {
  if (dims[0] < 0 || dims[1] < 0 || dims[0] >= state_dim || dims[1] >= state_dim || dims[0] == dims[1]) {
    throw DimensionError("predicate '" + name + "': planar coordinates outside the state space");
  }
  const auto hull = detail::convex_hull(std::move(vertices));
  if (hull.size() < 3) throw GeometryError("predicate '" + name + "' needs at least three non-collinear vertices");
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(hull.size()), state_dim);
  Vector b(static_cast<Eigen::Index>(hull.size()));
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Point2& p = hull[i];
    const Point2& q = hull[(i + 1) % hull.size()];
    // Outward normal of a counter-clockwise edge.
    const double nx = q[1] - p[1];
    const double ny = p[0] - q[0];
    const auto r = static_cast<Eigen::Index>(i);
    a(r, dims[0]) = nx;
    a(r, dims[1]) = ny;
    b(r) = nx * p[0] + ny * p[1];
  }
  return from_halfspaces(std::move(name), std::move(a), std::move(b));
}

/// Counter-clockwise outline of the slice of `p` on coordinates `dims`, using
/// only faces that involve no other coordinate. Clipped to |x|, |y| <= clip;
/// empty when the slice is empty.
inline std::vector<Point2> planar_vertices(const Predicate& p, std::array<int, 2> dims = {0, 1}, double clip = 1e6) {
  std::vector<std::array<double, 3>> rows;
  for (int i = 0; i < p.faces(); ++i) {
    const auto a = p.A().row(i);
    double other = 0.0;
    for (int d = 0; d < p.dim(); ++d) other += d == dims[0] || d == dims[1] ? 0.0 : std::abs(a(d));
    if (other == 0.0) rows.push_back({a(dims[0]), a(dims[1]), p.b()(i)});
  }
  rows.push_back({1, 0, clip});
  rows.push_back({-1, 0, clip});
  rows.push_back({0, 1, clip});
  rows.push_back({0, -1, clip});
  const double tol = 1e-9 * (1.0 + clip);
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      const auto& r = rows[i];
      const auto& s = rows[j];
      const double det = r[0] * s[1] - r[1] * s[0];
      if (std::abs(det) < 1e-12) continue;
      const Point2 q{(r[2] * s[1] - r[1] * s[2]) / det, (r[0] * s[2] - r[2] * s[0]) / det};
      bool inside = true;
      for (const auto& t : rows) inside = inside && t[0] * q[0] + t[1] * q[1] <= t[2] + tol;
      if (inside) pts.push_back(q);
    }
  }
  auto hull = detail::convex_hull(std::move(pts));
  if (hull.size() < 3) hull.clear();
  return hull;
}

/// Box [lo, hi] on two planar coordinates as a 4-face predicate.
inline Predicate rectangle(std::string name, Point2 lo, Point2 hi, int state_dim, std::array<int, 2> dims = {0, 1}) {
  return Predicate::from_vertices_2d(std::move(name), {{lo[0], lo[1]}, {hi[0], lo[1]}, {hi[0], hi[1]}, {lo[0], hi[1]}},
                                     state_dim, dims);
}

}  // namespace mtlsynth
