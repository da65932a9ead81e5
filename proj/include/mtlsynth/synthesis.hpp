#pragma once

// Lazy open-loop synthesis (solve, monitor, activate the critical constraint,
// repeat) and its receding-horizon counterpart with per-step time budgets.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtlsynth/encoding.hpp"
#include "mtlsynth/milp.hpp"
#include "mtlsynth/robustness.hpp"
#include "mtlsynth/scenario.hpp"

namespace mtlsynth {

enum class SynthesisStatus { Feasible, InfeasibleProven, NotFound, BudgetExhausted, IterationCapped, Stalled };

inline const char* to_string(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::Feasible: return "feasible";
    case SynthesisStatus::InfeasibleProven: return "infeasible-proven";
    case SynthesisStatus::NotFound: return "no-trajectory-found";
    case SynthesisStatus::BudgetExhausted: return "budget-exhausted";
    case SynthesisStatus::IterationCapped: return "iteration-capped";
    case SynthesisStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct SynthesisOptions {
  /// Maximum number of MILP solves; 0 means N times the number of occurrences.
  int max_iterations = 0;
  milp::Deadline deadline;
  milp::MilpOptions milp;
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::NotFound;
  bool has_plan = false;
  Trajectory trajectory;
  std::vector<Vector> inputs;
  double objective = milp::kInf;
  int iterations = 0;
  std::vector<Activation> activations;
  Witness resized;
  Witness original;
  long simplex_iterations = 0;
  long nodes = 0;
  double seconds = 0.0;
  std::string message;
};

inline int default_iteration_cap(const Encoding& enc) {
  return std::max(1, enc.horizon() * static_cast<int>(enc.occurrences().size()));
}

namespace detail {

inline double ms_since(milp::Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(milp::Clock::now() - t0).count();
}

/// Records a solver point as the current plan and monitors it.
inline void adopt_plan(const Encoding& enc, const std::vector<double>& values, SynthesisResult& r) {
  r.inputs = enc.inputs_from(values);
  r.trajectory = enc.trajectory_from(r.inputs);
  r.objective = enc.objective_of(r.inputs);
  r.has_plan = true;
  r.resized = evaluate(enc.formula(), r.trajectory, enc.resized_geometry());
  r.original = evaluate(enc.formula(), r.trajectory, enc.original_geometry());
}

/// The solve / monitor / activate loop. `frozen_until` marks indices whose
/// states can no longer change (the executed prefix in receding horizon).
inline SynthesisResult lazy_loop(Encoding& enc, const SynthesisOptions& opts, int frozen_until = 0) {
  const auto t0 = milp::Clock::now();
  SynthesisResult r;
  const int cap = opts.max_iterations > 0 ? opts.max_iterations : default_iteration_cap(enc);
  double last_value = -milp::kInf;
  for (;;) {
    if (milp::expired(opts.deadline)) {
      r.status = SynthesisStatus::BudgetExhausted;
      r.message = "deadline reached before a satisfying trajectory was found";
      break;
    }
    if (r.iterations >= cap) {
      r.status = SynthesisStatus::IterationCapped;
      r.message = "iteration cap of " + std::to_string(cap) + " reached";
      break;
    }
    ++r.iterations;
    const milp::Solution sol = milp::solve_milp(enc.model(), opts.deadline, opts.milp);
    r.simplex_iterations += sol.stats.simplex_iterations;
    r.nodes += sol.stats.nodes;
    if (sol.status == milp::Status::Infeasible) {
      const bool complete = is_conjunctive_globally(enc.formula()) && frozen_until == 0;
      r.status = complete ? SynthesisStatus::InfeasibleProven : SynthesisStatus::NotFound;
      r.message = complete ? "the MILP is infeasible, so the specification is unsatisfiable"
                           : "the MILP is infeasible; no trajectory found (incomplete fragment)";
      break;
    }
    if (!sol.has_point()) {
      r.status = sol.status == milp::Status::BudgetExceeded ? SynthesisStatus::BudgetExhausted : SynthesisStatus::NotFound;
      r.message = std::string("solver returned ") + milp::to_string(sol.status);
      break;
    }
    adopt_plan(enc, sol.values, r);
    if (r.resized.value >= 0.0) {
      r.status = sol.status == milp::Status::Optimal ? SynthesisStatus::Feasible : SynthesisStatus::BudgetExhausted;
      if (sol.status != milp::Status::Optimal) r.message = "satisfying incumbent found but optimality not proven";
      break;
    }
    if (sol.status != milp::Status::Optimal) {
      r.status = SynthesisStatus::BudgetExhausted;
      r.message = "deadline reached inside the MILP solve";
      break;
    }
    const Activation next{r.resized.critical_occurrence, r.resized.critical_index};
    if (next.index <= frozen_until && frozen_until > 0) {
      r.status = SynthesisStatus::Stalled;
      r.message = "critical index " + std::to_string(next.index) + " lies in the executed prefix";
      break;
    }
    if (enc.is_active(next.occurrence, next.index)) {
      r.status = SynthesisStatus::Stalled;
      r.message = "critical pair (" + std::to_string(next.occurrence) + ", " + std::to_string(next.index) +
                  ") is already active" + (r.resized.value > last_value + 1e-9 ? "" : " and robustness did not improve");
      break;
    }
    last_value = r.resized.value;
    enc.activate(next.occurrence, next.index);
    r.activations.push_back(next);
  }
  r.seconds = std::chrono::duration<double>(milp::Clock::now() - t0).count();
  return r;
}

}  // namespace detail

/// Lazy synthesis loop on the lazily activated encoding.
inline SynthesisResult synthesize_open_loop(Encoding& enc, const SynthesisOptions& opts = {}) {
  return detail::lazy_loop(enc, opts);
}

/// One solve of the non-lazy encoding (every required group active up front).
inline SynthesisResult synthesize_full(Encoding& enc, const SynthesisOptions& opts = {}) {
  const auto t0 = milp::Clock::now();
  enc.encode_full();
  SynthesisResult r;
  r.iterations = 1;
  const milp::Solution sol = milp::solve_milp(enc.model(), opts.deadline, opts.milp);
  r.simplex_iterations = sol.stats.simplex_iterations;
  r.nodes = sol.stats.nodes;
  if (sol.status == milp::Status::Infeasible) {
    r.status = SynthesisStatus::InfeasibleProven;
    r.message = "the full encoding is infeasible";
  } else if (!sol.has_point()) {
    r.status = SynthesisStatus::BudgetExhausted;
    r.message = std::string("solver returned ") + milp::to_string(sol.status);
  } else {
    detail::adopt_plan(enc, sol.values, r);
    if (sol.status != milp::Status::Optimal) {
      r.status = SynthesisStatus::BudgetExhausted;
    } else {
      r.status = r.resized.value >= 0.0 ? SynthesisStatus::Feasible : SynthesisStatus::NotFound;
    }
  }
  r.seconds = std::chrono::duration<double>(milp::Clock::now() - t0).count();
  return r;
}

// ----- receding horizon -----

/// New geometry for a predicate, taking effect at step ceil(time / dt).
struct PredicateUpdate {
  double time = 0.0;
  std::string predicate;
  Predicate geometry;
};

inline int update_step(const PredicateUpdate& u, double dt) {
  return std::max(0, static_cast<int>(std::ceil(u.time / dt - kIndexSlack)));
}

struct StepEvent {
  int step = 0;
  double time = 0.0;
  /// Combined trajectory: executed prefix followed by the current plan.
  std::vector<Vector> plan;
  bool has_plan = false;
  Witness robustness;
  /// Activations added during this step.
  std::vector<Activation> activations;
  /// "feasible", "infeasible" (incumbent violates the formula), "hold" (no
  /// solve finished; previous plan kept) or "final".
  std::string status;
  SynthesisStatus loop_status = SynthesisStatus::NotFound;
  double solve_ms = 0.0;
  int iterations = 0;
  std::vector<std::string> applied_updates;
  std::vector<PredicateUpdate> applied;
  std::vector<std::string> warnings;
};

inline nlohmann::json to_json(const Activation& a) { return {{"occurrence", a.occurrence}, {"k", a.index}}; }

inline nlohmann::json to_json(const StepEvent& e, const std::vector<PredicateOccurrence>& occurrences) {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& x : e.plan) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index d = 0; d < x.size(); ++d) row.push_back(x(d));
    plan.push_back(row);
  }
  nlohmann::json acts = nlohmann::json::array();
  for (const auto& a : e.activations) {
    nlohmann::json j = to_json(a);
    j["predicate"] = occurrences[static_cast<std::size_t>(a.occurrence)].predicate;
    acts.push_back(j);
  }
  nlohmann::json rob = nullptr;
  if (e.has_plan) {
    rob = {{"value", e.robustness.value},
           {"critical_index", e.robustness.critical_index},
           {"critical_occurrence", e.robustness.critical_occurrence},
           {"critical_predicate", occurrences[static_cast<std::size_t>(e.robustness.critical_occurrence)].predicate}};
  }
  return {{"step", e.step},
          {"time", e.time},
          {"plan", plan},
          {"robustness", rob},
          {"activations", acts},
          {"status", e.status},
          {"loop_status", to_string(e.loop_status)},
          {"iterations", e.iterations},
          {"solve_ms", e.solve_ms},
          {"applied_updates", e.applied_updates},
          {"warnings", e.warnings}};
}

/// Work: budgets are simplex pivots at `pivots_per_second`, so runs are
/// reproducible. Wall: budgets are real seconds.
enum class BudgetClock { Work, Wall };

/// Pivot rate of the built-in solver on the fixture scenarios (reference
/// desktop, single thread).
inline constexpr double kPivotsPerSecond = 20000.0;

struct RhcOptions {
  /// Budget per step for the solve / activate loop, in seconds.
  double step_deadline = 0.5;
  /// Budget for step 0, during which the robot waits at x0 for its first plan.
  double startup_deadline = 30.0;
  /// Optional cap on MILP solves per step (deterministic budget).
  std::optional<int> step_iterations;
  BudgetClock clock = BudgetClock::Work;
  double pivots_per_second = kPivotsPerSecond;
  milp::MilpOptions milp;
};

struct RhcResult {
  SynthesisStatus status = SynthesisStatus::NotFound;
  Trajectory trajectory;
  std::vector<Vector> inputs;
  double objective = 0.0;
  Witness resized;
  Witness original;
  std::vector<StepEvent> events;
  std::vector<Activation> activations;
  int infeasible_steps = 0;
};

/// Receding-horizon loop driven one step at a time. Geometry updates are
/// queued and applied at the next step boundary.
class RhcRunner {
public:
  RhcRunner(const Scenario& scenario, RhcOptions options)
      : scenario_(scenario), options_(std::move(options)), enc_(scenario) {}

  const Encoding& encoding() const { return enc_; }
  const Scenario& scenario() const { return scenario_; }
  int step() const { return step_; }
  int horizon() const { return enc_.horizon(); }
  bool done() const { return step_ > enc_.horizon(); }
  const std::vector<Vector>& executed_inputs() const { return executed_; }
  const std::vector<Vector>& plan_inputs() const { return plan_; }
  const std::vector<Activation>& activations() const { return activations_; }
  int infeasible_steps() const { return infeasible_steps_; }

  /// Executed states x_0..x_step.
  std::vector<Vector> executed_states() const { return enc_.system().rollout(enc_.initial_state(), executed_); }

  /// Executed prefix followed by the current plan.
  std::vector<Vector> combined_states() const {
    return plan_.empty() ? executed_states() : enc_.system().rollout(enc_.initial_state(), plan_);
  }

  /// Current geometry of a predicate (after applied updates).
  const Predicate& geometry(const std::string& name) const { return scenario_.predicate(name); }

  void queue_update(PredicateUpdate u) { pending_.push_back(std::move(u)); }
  int pending_updates() const { return static_cast<int>(pending_.size()); }

  const RhcOptions& options() const { return options_; }
  void set_step_deadline(double seconds) { options_.step_deadline = seconds; }
  void set_budget_clock(BudgetClock clock) { options_.clock = clock; }

  StepEvent advance() {
    if (done()) throw Error("receding-horizon run already finished");
    const auto t0 = milp::Clock::now();
    const int n = enc_.horizon();
    StepEvent ev;
    ev.step = step_;
    ev.time = step_ * enc_.system().dt;

    // Apply updates due at this step, in arrival order.
    std::vector<PredicateUpdate> later;
    for (auto& u : pending_) {
      if (update_step(u, enc_.system().dt) > step_) {
        later.push_back(std::move(u));
        continue;
      }
      try {
        enc_.update_predicate(u.predicate, u.geometry);
        scenario_.predicate(u.predicate) = u.geometry.renamed(u.predicate);
        ev.applied_updates.push_back(u.predicate);
        ev.applied.push_back(u);
      } catch (const Error& e) {
        ev.warnings.push_back(std::string("update of '") + u.predicate + "' rejected: " + e.what());
      }
    }
    pending_ = std::move(later);

    enc_.pin_inputs(executed_, step_);
    if (step_ == n) {
      plan_ = executed_;
      const Trajectory t = enc_.trajectory_from(executed_);
      ev.plan = t.states;
      ev.has_plan = true;
      ev.robustness = evaluate(enc_.formula(), t, enc_.resized_geometry());
      ev.status = "final";
      ev.loop_status = ev.robustness.value >= 0.0 ? SynthesisStatus::Feasible : SynthesisStatus::NotFound;
      ev.solve_ms = detail::ms_since(t0);
      ++step_;
      return ev;
    }

    SynthesisOptions so;
    const double budget = step_ == 0 && options_.step_deadline > 0.0 ? std::max(options_.step_deadline, options_.startup_deadline)
                                                                     : options_.step_deadline;
    so.deadline = options_.clock == BudgetClock::Wall
                      ? milp::deadline_after(budget)
                      : milp::Deadline::work(static_cast<long>(std::llround(budget * options_.pivots_per_second)));
    so.milp = options_.milp;
    if (options_.step_iterations) so.max_iterations = *options_.step_iterations;
    SynthesisResult r;
    if (options_.step_deadline > 0.0) {
      r = detail::lazy_loop(enc_, so, step_);
    } else {
      r.status = SynthesisStatus::BudgetExhausted;
    }
    ev.iterations = r.iterations;
    ev.loop_status = r.status;
    ev.activations = r.activations;
    activations_.insert(activations_.end(), r.activations.begin(), r.activations.end());

    const bool previous_ok = !plan_.empty() && plan_robust_;
    if (r.has_plan) {
      // A replan that does not beat a previous plan still satisfying the
      // current geometry keeps the previous plan.
      const bool keep_previous = previous_ok && r.objective >= plan_objective_ - 1e-9 &&
                                 evaluate(enc_.formula(), enc_.trajectory_from(plan_), enc_.resized_geometry()).value >= 0.0;
      if (!keep_previous) {
        plan_ = r.inputs;
        plan_objective_ = r.objective;
      }
    } else {
      ev.warnings.push_back(std::string("no plan at step ") + std::to_string(step_) + " (" + to_string(r.status) +
                            "); holding the previous plan");
      if (plan_.empty()) plan_.assign(static_cast<std::size_t>(n), Vector::Zero(enc_.system().m()));
      for (int k = 0; k < step_; ++k) plan_[static_cast<std::size_t>(k)] = executed_[static_cast<std::size_t>(k)];
      plan_objective_ = enc_.objective_of(plan_);
    }
    const Trajectory t = enc_.trajectory_from(plan_);
    ev.plan = t.states;
    ev.has_plan = true;
    ev.robustness = evaluate(enc_.formula(), t, enc_.resized_geometry());
    plan_robust_ = ev.robustness.value >= 0.0;
    ev.status = !r.has_plan ? "hold" : plan_robust_ ? "feasible" : "infeasible";
    if (!plan_robust_ || !r.has_plan) ++infeasible_steps_;
    executed_.push_back(plan_[static_cast<std::size_t>(step_)]);
    ev.solve_ms = detail::ms_since(t0);
    ++step_;
    return ev;
  }

  RhcResult result() const {
    RhcResult out;
    out.inputs = executed_;
    out.trajectory = enc_.trajectory_from(executed_);
    out.objective = enc_.objective_of(executed_);
    const bool complete = static_cast<int>(executed_.size()) == enc_.horizon();
    if (complete) {
      out.resized = evaluate(enc_.formula(), out.trajectory, enc_.resized_geometry());
      out.original = evaluate(enc_.formula(), out.trajectory, enc_.original_geometry());
      out.status = out.resized.value >= 0.0 ? SynthesisStatus::Feasible : SynthesisStatus::NotFound;
    } else {
      out.status = SynthesisStatus::BudgetExhausted;
    }
    out.activations = activations_;
    out.infeasible_steps = infeasible_steps_;
    return out;
  }

private:
  Scenario scenario_;
  RhcOptions options_;
  Encoding enc_;
  int step_ = 0;
  std::vector<Vector> executed_;
  std::vector<Vector> plan_;
  double plan_objective_ = milp::kInf;
  bool plan_robust_ = false;
  std::vector<PredicateUpdate> pending_;
  std::vector<Activation> activations_;
  int infeasible_steps_ = 0;
};

/// Receding-horizon synthesis over a scripted list of geometry updates. `sink` receives every
/// step event as it is produced.
inline RhcResult synthesize_rhc(const Scenario& scenario, const RhcOptions& options,
                                const std::vector<PredicateUpdate>& updates = {},
                                const std::function<void(const StepEvent&, const RhcRunner&)>& sink = {}) {
  RhcRunner runner(scenario, options);
  for (const auto& u : updates) runner.queue_update(u);
  std::vector<StepEvent> events;
  while (!runner.done()) {
    StepEvent ev = runner.advance();
    if (sink) sink(ev, runner);
    events.push_back(std::move(ev));
  }
  RhcResult out = runner.result();
  out.events = std::move(events);
  return out;
}

}  // namespace mtlsynth
