#pragma once

// Reference robustness by explicit expansion: every temporal operator is
// unrolled into a finite min/max tree over (occurrence, index) leaves, then
// folded. No witness tracking, no memoization. Test oracle only.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "mtlsynth/robustness.hpp"

namespace mtlsynth::brute {

inline constexpr int kMaxIndex = 12;
inline constexpr int kMaxDepth = 4;

struct Node {
  enum class Kind { Leaf, Min, Max } kind = Kind::Leaf;
  int occurrence = -1;
  int index = 0;
  bool negated = false;
  std::vector<Node> children;
};

namespace detail {

inline int first_index(const Interval& i, double dt) { return static_cast<int>(std::ceil(i.lo / dt - 1e-9)); }
inline int last_index(const Interval& i, double dt, int n) {
  return i.bounded() ? static_cast<int>(std::floor(i.hi / dt + 1e-9)) : n;
}

inline Node expand(const Formula& f, int k, double dt, int n) {
  Node node;
  switch (f.op) {
    case Op::Pred:
      node.occurrence = f.occurrence;
      node.index = k;
      return node;
    case Op::Not:
      node = expand(f.args[0], k, dt, n);
      node.negated = !node.negated;
      return node;
    case Op::And:
    case Op::Or:
      node.kind = f.op == Op::And ? Node::Kind::Min : Node::Kind::Max;
      for (const auto& a : f.args) node.children.push_back(expand(a, k, dt, n));
      return node;
    case Op::Globally:
    case Op::Eventually: {
      node.kind = f.op == Op::Globally ? Node::Kind::Min : Node::Kind::Max;
      const int lo = k + first_index(f.interval, dt);
      const int hi = f.interval.bounded() ? k + last_index(f.interval, dt, n) : n - horizon(f.args[0], dt);
      if (hi > n || lo > hi) throw HorizonError("brute-force window outside trajectory");
      for (int j = lo; j <= hi; ++j) node.children.push_back(expand(f.args[0], j, dt, n));
      return node;
    }
    case Op::Until: {
      node.kind = Node::Kind::Max;
      const int lo = k + first_index(f.interval, dt);
      const int hi = k + last_index(f.interval, dt, n);
      if (hi > n || lo > hi) throw HorizonError("brute-force window outside trajectory");
      for (int j = lo; j <= hi; ++j) {
        Node term;
        term.kind = Node::Kind::Min;
        term.children.push_back(expand(f.args[1], j, dt, n));
        for (int i = k; i < j; ++i) term.children.push_back(expand(f.args[0], i, dt, n));
        node.children.push_back(std::move(term));
      }
      return node;
    }
    case Op::Implies:
      throw UnsupportedFragment("brute-force oracle expects negation normal form");
  }
  return node;
}

inline double fold(const Node& node, const Trajectory& traj, std::span<const Predicate> geometry) {
  if (node.kind == Node::Kind::Leaf) {
    const Predicate& p = geometry[static_cast<std::size_t>(node.occurrence)];
    const Vector& x = traj.states[static_cast<std::size_t>(node.index)];
    double v = p.b()(0) - p.A().row(0).dot(x);
    for (int i = 1; i < p.faces(); ++i) v = std::min(v, p.b()(i) - p.A().row(i).dot(x));
    return node.negated ? -v : v;
  }
  double acc = node.kind == Node::Kind::Min ? INFINITY : -INFINITY;
  for (const auto& c : node.children) {
    const double v = fold(c, traj, geometry);
    acc = node.kind == Node::Kind::Min ? std::min(acc, v) : std::max(acc, v);
  }
  return acc;
}

}  // namespace detail

/// Robustness at index 0 by full expansion; limited to N <= 12 and depth <= 4.
inline double evaluate_brute(const Formula& nnf, const Trajectory& traj, std::span<const Predicate> geometry) {
  if (traj.last_index() > kMaxIndex || depth(nnf) > kMaxDepth) {
    throw Error("brute-force oracle size guard exceeded (N <= 12, depth <= 4)");
  }
  return detail::fold(detail::expand(nnf, 0, traj.dt, traj.last_index()), traj, geometry);
}

}  // namespace mtlsynth::brute
