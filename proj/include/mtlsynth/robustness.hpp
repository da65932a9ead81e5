#pragma once

// Discrete-time space robustness of MTL formulas over sampled trajectories,
// with the critical time index and critical predicate occurrence.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mtlsynth/error.hpp"
#include "mtlsynth/mtl.hpp"
#include "mtlsynth/predicate.hpp"

namespace mtlsynth {

struct Trajectory {
  std::vector<Vector> states;
  double dt = 1.0;

  Trajectory() = default;
  Trajectory(std::vector<Vector> s, double step) : states(std::move(s)), dt(step) { validate(); }

  int last_index() const { return static_cast<int>(states.size()) - 1; }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }

  void validate() const {
    if (!(dt > 0.0)) throw Error("trajectory sample time must be positive");
    for (const auto& s : states) {
      if (s.size() != states.front().size()) throw DimensionError("trajectory states differ in dimension");
    }
  }
};

struct Witness {
  double value = 0.0;
  int critical_index = 0;
  int critical_occurrence = -1;
};

/// Window [at + ceil(lo/dt), at + floor(hi/dt)] with a small slack absorbing
/// representation error (8.5 / 0.5 must give 17).
struct IndexWindow {
  int first;
  int last;
};

inline IndexWindow index_window(const Interval& i, double dt, int at, int last_index) {
  const int first = at + static_cast<int>(std::ceil(i.lo / dt - kIndexSlack));
  const int last = i.bounded() ? at + static_cast<int>(std::floor(i.hi / dt + kIndexSlack)) : last_index;
  return {first, last};
}

namespace detail {

inline bool better_min(const Witness& cand, const Witness& best) {
  if (cand.value != best.value) return cand.value < best.value;
  if (cand.critical_index != best.critical_index) return cand.critical_index < best.critical_index;
  return cand.critical_occurrence < best.critical_occurrence;
}

inline bool better_max(const Witness& cand, const Witness& best) {
  if (cand.value != best.value) return cand.value > best.value;
  if (cand.critical_index != best.critical_index) return cand.critical_index < best.critical_index;
  return cand.critical_occurrence < best.critical_occurrence;
}

class Monitor {
public:
  Monitor(const Trajectory& traj, std::span<const Predicate> geometry) : traj_(traj), geometry_(geometry) {}

  Witness eval(const Formula& f, int at) {
    const auto key = std::make_pair(&f, at);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Witness w = compute(f, at);
    memo_.emplace(key, w);
    return w;
  }

private:
  const Predicate& geometry_for(const Formula& leaf) const {
    if (leaf.occurrence < 0 || static_cast<std::size_t>(leaf.occurrence) >= geometry_.size()) {
      throw Error("predicate '" + leaf.name + "' has no geometry for occurrence " + std::to_string(leaf.occurrence));
    }
    return geometry_[static_cast<std::size_t>(leaf.occurrence)];
  }

  IndexWindow window(const Formula& f, int at) const {
    // Unbounded always runs up to the last index its operand can still be
    // evaluated at.
    const int tail = f.interval.bounded() ? 0 : horizon(f.args[0], traj_.dt);
    const IndexWindow w = index_window(f.interval, traj_.dt, at, traj_.last_index() - tail);
    if (w.last > traj_.last_index()) {
      throw HorizonError("temporal window ends at index " + std::to_string(w.last) + " but the trajectory ends at " +
                         std::to_string(traj_.last_index()));
    }
    if (w.first > w.last) throw HorizonError("temporal window contains no sample index");
    return w;
  }

  Witness compute(const Formula& f, int at) {
    switch (f.op) {
      case Op::Pred: {
        if (at < 0 || at > traj_.last_index()) throw HorizonError("evaluation index outside the trajectory");
        const double v = predicate_robustness(traj_.states[static_cast<std::size_t>(at)], geometry_for(f));
        return {v, at, f.occurrence};
      }
      case Op::Not: {
        if (f.args[0].op != Op::Pred) throw UnsupportedFragment("formula is not in negation normal form");
        Witness w = eval(f.args[0], at);
        w.value = -w.value;
        return w;
      }
      case Op::And:
      case Op::Or: {
        const bool is_min = f.op == Op::And;
        Witness best = eval(f.args[0], at);
        for (std::size_t i = 1; i < f.args.size(); ++i) {
          const Witness c = eval(f.args[i], at);
          if (is_min ? better_min(c, best) : better_max(c, best)) best = c;
        }
        return best;
      }
      case Op::Globally:
      case Op::Eventually: {
        const bool is_min = f.op == Op::Globally;
        const IndexWindow w = window(f, at);
        Witness best = eval(f.args[0], w.first);
        for (int k = w.first + 1; k <= w.last; ++k) {
          const Witness c = eval(f.args[0], k);
          if (is_min ? better_min(c, best) : better_max(c, best)) best = c;
        }
        return best;
      }
      case Op::Until: {
        if (!f.interval.bounded()) throw UnsupportedFragment("unbounded until");
        const IndexWindow w = window(f, at);
        Witness best{};
        bool have = false;
        // Running min of the left operand over [at, k).
        Witness prefix{};
        bool have_prefix = false;
        for (int k = at; k <= w.last; ++k) {
          if (k >= w.first) {
            Witness c = eval(f.args[1], k);
            if (have_prefix && better_min(prefix, c)) c = prefix;
            if (!have || better_max(c, best)) {
              best = c;
              have = true;
            }
          }
          if (k == w.last) break;
          const Witness l = eval(f.args[0], k);
          if (!have_prefix || better_min(l, prefix)) {
            prefix = l;
            have_prefix = true;
          }
        }
        return best;
      }
      case Op::Implies:
        throw UnsupportedFragment("formula is not in negation normal form");
    }
    throw Error("unknown formula node");
  }

  const Trajectory& traj_;
  std::span<const Predicate> geometry_;
  std::map<std::pair<const Formula*, int>, Witness> memo_;
};

}  // namespace detail

/// Robustness of an NNF formula (leaves numbered by to_nnf) at index `at`.
/// `geometry[o]` is the polyhedron used for occurrence o.
inline Witness evaluate(const Formula& nnf, const Trajectory& traj, std::span<const Predicate> geometry, int at = 0) {
  if (traj.states.empty()) throw HorizonError("empty trajectory");
  return detail::Monitor(traj, geometry).eval(nnf, at);
}

/// Per-occurrence geometry: predicates looked up by name and resized by rho
/// according to polarity (rho = 0 gives the original sets).
template <typename Lookup>
  requires std::is_invocable_v<Lookup&, const std::string&>
std::vector<Predicate> occurrence_geometry(const Formula& nnf, Lookup&& lookup, double rho) {
  std::vector<Predicate> out;
  for (const auto& occ : classify_occurrences(nnf)) {
    const Predicate& p = lookup(occ.predicate);
    out.push_back(resize_for(p, occ.polarity, rho));
  }
  return out;
}

inline std::vector<Predicate> occurrence_geometry(const Formula& nnf, const std::vector<Predicate>& predicates,
                                                  double rho) {
  return occurrence_geometry(
      nnf,
      [&](const std::string& name) -> const Predicate& {
        for (const auto& p : predicates) {
          if (p.name() == name) return p;
        }
        throw Error("unknown predicate '" + name + "'");
      },
      rho);
}

}  // namespace mtlsynth
