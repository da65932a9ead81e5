#pragma once

// A complete synthesis problem: dynamics, workspace, predicates, formula,
// robustness target and objective weights.

#include <optional>
#include <string>
#include <vector>

#include "mtlsynth/dynamics.hpp"
#include "mtlsynth/error.hpp"
#include "mtlsynth/mtl.hpp"
#include "mtlsynth/predicate.hpp"

namespace mtlsynth {

struct Scenario {
  std::string name;
  std::string description;
  /// "double_integrator_2d" or "explicit".
  std::string dynamics_kind = "double_integrator_2d";
  LinearSystem system;
  Box workspace;
  std::vector<Predicate> predicates;
  /// Unsafe predicates reserved for obstacles that appear at run time; each is
  /// conjoined to the formula as `G !name`.
  std::vector<std::string> placeholders;
  std::string formula_text;
  double rho = 0.0;
  Vector weights;
  std::optional<int> horizon_override;
  Vector x0;
  double rhc_deadline = 0.5;

  const Predicate& predicate(const std::string& pred_name) const {
    for (const auto& p : predicates) {
      if (p.name() == pred_name) return p;
    }
    throw ScenarioError("unknown predicate '" + pred_name + "'");
  }

  Predicate& predicate(const std::string& pred_name) {
    return const_cast<Predicate&>(static_cast<const Scenario&>(*this).predicate(pred_name));
  }

  bool has_predicate(const std::string& pred_name) const {
    for (const auto& p : predicates) {
      if (p.name() == pred_name) return true;
    }
    return false;
  }

  /// Parsed formula with the placeholder obstacles conjoined, not yet in NNF.
  Formula formula() const {
    Formula f = parse(formula_text);
    if (placeholders.empty()) return f;
    std::vector<Formula> parts{std::move(f)};
    for (const auto& p : placeholders) {
      parts.push_back(Formula::globally(Interval::unbounded(), Formula::negate(Formula::pred(p))));
    }
    return Formula::conj(std::move(parts));
  }

  Formula nnf() const { return to_nnf(formula()); }

  int horizon() const { return horizon_override ? *horizon_override : mtlsynth::horizon(nnf(), system.dt); }

  void validate() const {
    system.validate();
    const int n = system.n();
    if (workspace.dim() != n || workspace.hi.size() != n) throw ScenarioError("workspace: dimension must match the state");
    if (!workspace.bounded()) throw ScenarioError("workspace: box must be bounded");
    if (((workspace.hi - workspace.lo).array() < 0).any()) throw ScenarioError("workspace: lower bound exceeds upper bound");
    if (x0.size() != n) throw ScenarioError("initial_state: dimension must match the state");
    if (!workspace.contains(x0)) throw ScenarioError("initial_state: outside the workspace");
    if (!(rho >= 0.0)) throw ScenarioError("rho: must be non-negative");
    if (weights.size() != system.m()) throw ScenarioError("weights: one weight per input required");
    if ((weights.array() < 0).any()) throw ScenarioError("weights: must be non-negative");
    if (horizon_override && *horizon_override < 0) throw ScenarioError("horizon: must be non-negative");
    if (!(rhc_deadline >= 0.0)) throw ScenarioError("rhc.deadline: must be non-negative");
    for (const auto& p : predicates) {
      if (p.dim() != n) throw ScenarioError("predicates." + p.name() + ": dimension must match the state");
    }
    for (std::size_t i = 0; i < predicates.size(); ++i) {
      for (std::size_t j = i + 1; j < predicates.size(); ++j) {
        if (predicates[i].name() == predicates[j].name()) {
          throw ScenarioError("predicates: duplicate name '" + predicates[i].name() + "'");
        }
      }
    }
    for (const auto& ph : placeholders) {
      if (!has_predicate(ph)) throw ScenarioError("placeholders: unknown predicate '" + ph + "'");
    }
    Formula f;
    try {
      f = nnf();
    } catch (const ParseError& e) {
      throw ScenarioError(std::string("formula: ") + e.what());
    }
    for (const auto& occ : classify_occurrences(f)) {
      if (!has_predicate(occ.predicate)) throw ScenarioError("formula: unknown predicate '" + occ.predicate + "'");
    }
    (void)horizon();
  }
};

}  // namespace mtlsynth
