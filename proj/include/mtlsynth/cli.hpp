#pragma once

// Command implementations behind the mtlsynth tool: plan, rhc, monitor and
// plot. Each returns the process exit code.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtlsynth/dynamics.hpp"
#include "mtlsynth/plot.hpp"
#include "mtlsynth/reactive/session.hpp"
#include "mtlsynth/scenario_io.hpp"
#include "mtlsynth/synthesis.hpp"

namespace mtlsynth::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kInvalid = 1, kInfeasible = 2, kBudget = 3 };

inline int exit_code(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::Feasible: return kOk;
    case SynthesisStatus::InfeasibleProven: return kInfeasible;
    default: return kBudget;
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

inline void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::string inputs_csv(const std::vector<Vector>& inputs, double dt) {
  std::ostringstream os;
  os << "k,t,ux,uy\n";
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    os << k << ',' << detail::csv_number(static_cast<double>(k) * dt) << ',' << detail::csv_number(inputs[k](0)) << ','
       << detail::csv_number(inputs[k](1)) << '\n';
  }
  return os.str();
}

inline std::string trajectory_csv(const std::vector<Vector>& states, const std::vector<Vector>& inputs, double dt) {
  std::ostringstream os;
  write_trajectory_csv(os, states, inputs, dt);
  return os.str();
}

inline json witness_pair(const Witness& resized, const Witness& original, const std::vector<PredicateOccurrence>& occ,
                         double dt) {
  const auto one = [&](const Witness& w) {
    json j = reactive::witness_json(w, occ);
    j["critical_time"] = w.critical_index * dt;
    return j;
  };
  return {{"resized", one(resized)}, {"original", one(original)}};
}

inline std::string describe(const char* label, const Witness& w, const std::vector<PredicateOccurrence>& occ, double dt) {
  std::ostringstream os;
  os << "robustness (" << label << "): " << w.value << " at t = " << w.critical_index * dt << " s (k = "
     << w.critical_index << ") on " << occ[static_cast<std::size_t>(w.critical_occurrence)].predicate << '\n';
  return os.str();
}

// ----- plan -----

struct PlanArgs {
  std::string scenario;
  std::string out_dir = "out";
  bool full_encoding = false;
  int max_iterations = 0;
  /// Seconds; 0 means unlimited.
  double time_limit = 0.0;
  bool unicycle = false;
};

inline int cmd_plan(const PlanArgs& args, std::ostream& out) {
  const Scenario sc = load_scenario(args.scenario);
  Encoding enc(sc);
  SynthesisOptions so;
  so.max_iterations = args.max_iterations;
  if (args.time_limit > 0.0) so.deadline = milp::deadline_after(args.time_limit);
  const SynthesisResult r = args.full_encoding ? synthesize_full(enc, so) : synthesize_open_loop(enc, so);
  const double dt = sc.system.dt;
  const auto& occ = enc.occurrences();

  make_dir(args.out_dir);
  const fs::path dir(args.out_dir);
  write_file(dir / "scenario.toml", scenario_to_string(sc));
  std::string acts;
  for (std::size_t i = 0; i < r.activations.size(); ++i) {
    const auto& a = r.activations[i];
    acts += json{{"iteration", i + 1},
                 {"occurrence", a.occurrence},
                 {"k", a.index},
                 {"predicate", occ[static_cast<std::size_t>(a.occurrence)].predicate}}
                .dump() +
            "\n";
  }
  write_file(dir / "activations.jsonl", acts);
  json summary = {{"command", "plan"},
                  {"scenario", sc.name},
                  {"encoding", args.full_encoding ? "full" : "lazy"},
                  {"status", to_string(r.status)},
                  {"message", r.message},
                  {"has_plan", r.has_plan},
                  {"iterations", r.iterations},
                  {"activations", r.activations.size()},
                  {"active_groups", enc.num_active_groups()},
                  {"row_groups", enc.num_groups()},
                  {"horizon", enc.horizon()},
                  {"objective", nullptr},
                  {"robustness", nullptr}};
  out << "status: " << to_string(r.status) << '\n';
  if (!r.message.empty()) out << "message: " << r.message << '\n';
  out << "iterations: " << r.iterations << '\n';
  if (r.has_plan) {
    write_file(dir / "trajectory.csv", trajectory_csv(r.trajectory.states, r.inputs, dt));
    write_file(dir / "inputs.csv", inputs_csv(r.inputs, dt));
    const json w = witness_pair(r.resized, r.original, occ, dt);
    write_file(dir / "witness.json", w.dump(2) + "\n");
    summary["objective"] = r.objective;
    summary["robustness"] = w;
    out << "J: " << r.objective << '\n';
    out << describe("resized", r.resized, occ, dt) << describe("original", r.original, occ, dt);
    if (args.unicycle) {
      const UnicycleTrace trace = simulate_unicycle(unicycle_from_double_integrator(sc.x0), r.inputs, dt);
      std::ostringstream os;
      write_unicycle_csv(os, trace);
      write_file(dir / "unicycle.csv", os.str());
    }
  } else {
    for (const char* stale : {"trajectory.csv", "inputs.csv", "witness.json", "unicycle.csv"}) {
      std::error_code ec;
      fs::remove(dir / stale, ec);
    }
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return exit_code(r.status);
}

// ----- rhc -----

struct RhcArgs {
  std::string scenario;
  std::string events;
  std::string out_dir = "out";
  /// Per-step budget in seconds; defaults to the scenario's rhc.deadline.
  std::optional<double> deadline;
  double startup_deadline = 30.0;
  std::optional<int> step_iterations;
  /// Include solve_ms in events.jsonl (makes the file run-dependent).
  bool timings = false;
  /// Budgets in real seconds instead of pivots (run-dependent).
  bool wall_budget = false;
};

inline RhcOptions rhc_options(const RhcArgs& args, const Scenario& sc) {
  RhcOptions o;
  o.step_deadline = args.deadline.value_or(sc.rhc_deadline);
  o.startup_deadline = args.startup_deadline;
  o.step_iterations = args.step_iterations;
  o.clock = args.wall_budget ? BudgetClock::Wall : BudgetClock::Work;
  return o;
}

/// Streams step events to events.jsonl and writes the final artifacts of a
/// receding-horizon run. A step-0 event starts a new run in the same directory.
class RhcArtifacts {
public:
  RhcArtifacts(fs::path dir, bool timings) : dir_(std::move(dir)), timings_(timings) { make_dir(dir_); }

  void on_step(const StepEvent& ev, const RhcRunner& runner) {
    if (ev.step == 0) {
      events_.close();
      events_.open(dir_ / "events.jsonl", std::ios::binary | std::ios::trunc);
      if (!events_) throw Error("cannot write '" + (dir_ / "events.jsonl").string() + "'");
      applied_.clear();
      step_activations_.clear();
      initial_ = runner.scenario();
      for (const auto& u : ev.applied) initial_.predicate(u.predicate) = prior_geometry(u.predicate);
    }
    json j = to_json(ev, runner.encoding().occurrences());
    if (!timings_) j.erase("solve_ms");
    events_ << j.dump() << '\n';
    events_.flush();
    applied_.insert(applied_.end(), ev.applied.begin(), ev.applied.end());
    for (const auto& a : ev.activations) step_activations_.push_back({ev.step, a});
  }

  void on_done(const RhcResult& r, const RhcRunner& runner) {
    events_.close();
    const double dt = runner.scenario().system.dt;
    const auto& occ = runner.encoding().occurrences();
    write_file(dir_ / "scenario.toml", scenario_to_string(initial_));
    write_file(dir_ / "updates.json", updates_to_json(applied_).dump(2) + "\n");
    write_file(dir_ / "trajectory.csv", trajectory_csv(r.trajectory.states, r.inputs, dt));
    write_file(dir_ / "inputs.csv", inputs_csv(r.inputs, dt));
    const bool complete = static_cast<int>(r.inputs.size()) == runner.horizon();
    json w = nullptr;
    if (complete) {
      w = witness_pair(r.resized, r.original, occ, dt);
      write_file(dir_ / "witness.json", w.dump(2) + "\n");
    }
    std::string acts;
    for (const auto& [step, a] : step_activations_) {
      acts += json{{"step", step},
                   {"occurrence", a.occurrence},
                   {"k", a.index},
                   {"predicate", occ[static_cast<std::size_t>(a.occurrence)].predicate}}
                  .dump() +
              "\n";
    }
    write_file(dir_ / "activations.jsonl", acts);
    const json summary = {{"command", "rhc"},
                          {"scenario", initial_.name},
                          {"status", to_string(r.status)},
                          {"objective", r.objective},
                          {"horizon", runner.horizon()},
                          {"infeasible_steps", r.infeasible_steps},
                          {"activations", step_activations_.size()},
                          {"updates_applied", applied_.size()},
                          {"robustness", w}};
    write_file(dir_ / "summary.json", summary.dump(2) + "\n");
  }

  /// Geometry a predicate had before the run; set by the caller for updates
  /// applied at step 0.
  std::map<std::string, Predicate> initial_geometry;

private:
  Predicate prior_geometry(const std::string& name) const {
    const auto it = initial_geometry.find(name);
    if (it == initial_geometry.end()) throw Error("no initial geometry recorded for '" + name + "'");
    return it->second;
  }

  fs::path dir_;
  bool timings_;
  std::ofstream events_;
  Scenario initial_;
  std::vector<PredicateUpdate> applied_;
  std::vector<std::pair<int, Activation>> step_activations_;
};

inline std::map<std::string, Predicate> geometry_by_name(const Scenario& sc) {
  std::map<std::string, Predicate> out;
  for (const auto& p : sc.predicates) out[p.name()] = p;
  return out;
}

inline void print_rhc_result(std::ostream& out, const RhcResult& r, const RhcRunner& runner) {
  const double dt = runner.scenario().system.dt;
  const auto& occ = runner.encoding().occurrences();
  out << "status: " << to_string(r.status) << '\n';
  out << "steps: " << r.inputs.size() << " of " << runner.horizon() << '\n';
  out << "infeasible steps: " << r.infeasible_steps << '\n';
  out << "J: " << r.objective << '\n';
  if (static_cast<int>(r.inputs.size()) == runner.horizon()) {
    out << describe("resized", r.resized, occ, dt) << describe("original", r.original, occ, dt);
  }
}

inline int cmd_rhc(const RhcArgs& args, std::ostream& out) {
  const Scenario sc = load_scenario(args.scenario);
  const std::vector<PredicateUpdate> updates = args.events.empty() ? std::vector<PredicateUpdate>{}
                                                                   : load_updates(args.events, sc);
  RhcArtifacts artifacts(args.out_dir, args.timings);
  artifacts.initial_geometry = geometry_by_name(sc);
  RhcRunner runner(sc, rhc_options(args, sc));
  for (const auto& u : updates) runner.queue_update(u);
  int warnings = 0;
  while (!runner.done()) {
    const StepEvent ev = runner.advance();
    artifacts.on_step(ev, runner);
    for (const auto& w : ev.warnings) {
      if (++warnings <= 5) out << "warning: " << w << '\n';
    }
  }
  if (warnings > 5) out << "warning: " << warnings - 5 << " more warnings in events.jsonl\n";
  const RhcResult r = runner.result();
  artifacts.on_done(r, runner);
  print_rhc_result(out, r, runner);
  return exit_code(r.status);
}

// ----- monitor -----

struct MonitorArgs {
  std::string trajectory;
  std::string predicates;
  std::string formula;
  std::optional<double> rho;
  bool json_output = false;
};

inline int cmd_monitor(const MonitorArgs& args, std::ostream& out) {
  std::ifstream in(args.trajectory);
  if (!in) throw Error("cannot open '" + args.trajectory + "'");
  const TrajectoryCsv csv = read_trajectory_csv(in, args.trajectory);
  const int dim = static_cast<int>(csv.states.front().size());
  const PredicateFile pf = parse_predicate_file(read_file(args.predicates), dim, args.predicates);
  const std::string text = !args.formula.empty() ? args.formula : pf.formula.value_or("");
  if (text.empty()) throw Error("no formula: pass --formula or set `formula` in the predicates file");
  const double rho = args.rho.value_or(pf.rho);
  if (!(rho >= 0.0)) throw Error("rho must be non-negative");
  const Formula nnf = to_nnf(parse(text));
  const int needed = horizon(nnf, csv.dt);
  const Trajectory traj(csv.states, csv.dt);
  if (needed > traj.last_index()) {
    throw HorizonError("formula horizon " + std::to_string(needed) + " exceeds the trajectory's last index " +
                       std::to_string(traj.last_index()));
  }
  const auto occ = classify_occurrences(nnf);
  const auto geometry = occurrence_geometry(nnf, pf.predicates, rho);
  const Witness w = evaluate(nnf, traj, geometry);
  const std::string pred = w.critical_occurrence >= 0 ? occ[static_cast<std::size_t>(w.critical_occurrence)].predicate : "";
  if (args.json_output) {
    out << json{{"value", w.value},
                {"critical_index", w.critical_index},
                {"critical_time", w.critical_index * csv.dt},
                {"critical_occurrence", w.critical_occurrence},
                {"critical_predicate", pred},
                {"rho", rho},
                {"formula", text}}
               .dump(2)
        << '\n';
  } else {
    out << "robustness: " << w.value << '\n';
    out << "critical time: " << w.critical_index * csv.dt << " s (index " << w.critical_index << ")\n";
    out << "critical predicate: " << (pred.empty() ? "-" : pred) << '\n';
  }
  return kOk;
}

// ----- plot -----

struct PlotArgs {
  std::string dir;
  /// Output directory; defaults to the artifacts directory.
  std::string out_dir;
};

namespace detail {

inline Point2 planar(const Vector& x) { return {x(0), x(1)}; }

inline std::vector<Point2> planar_path(const std::vector<Vector>& xs) {
  std::vector<Point2> out;
  for (const auto& x : xs) out.push_back(planar(x));
  return out;
}

inline std::vector<Vector> states_from_json(const json& rows) {
  std::vector<Vector> out;
  for (const auto& row : rows) {
    Vector x(static_cast<Eigen::Index>(row.size()));
    for (std::size_t d = 0; d < row.size(); ++d) x(static_cast<Eigen::Index>(d)) = row[d].get<double>();
    out.push_back(x);
  }
  return out;
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline PlotScene base_scene(const Scenario& sc, const std::string& title) {
  PlotScene scene;
  scene.title = title;
  scene.workspace = sc.workspace;
  scene.rho = sc.rho;
  const auto pol = reactive::predicate_polarities(sc);
  for (const auto& p : sc.predicates) scene.predicates.push_back({p, pol.at(p.name())});
  return scene;
}

inline std::optional<PlotMarker> critical_marker(const json& w, const std::vector<Vector>& states) {
  if (w.is_null()) return std::nullopt;
  const int k = w.at("critical_index").get<int>();
  if (k < 0 || k >= static_cast<int>(states.size())) return std::nullopt;
  std::ostringstream label;
  label << "critical: " << w.at("critical_predicate").get<std::string>() << " at k = " << k
        << ", robustness " << w.at("value").get<double>();
  return PlotMarker{planar(states[static_cast<std::size_t>(k)]), label.str()};
}

inline void add_activation(PlotScene& scene, const json& a, const std::vector<Vector>& states) {
  const int k = a.at("k").get<int>();
  if (k < 0 || k >= static_cast<int>(states.size())) return;
  scene.activations.push_back({planar(states[static_cast<std::size_t>(k)]),
                               a.at("predicate").get<std::string>() + " at k = " + std::to_string(k)});
}

}  // namespace detail

inline int cmd_plot(const PlotArgs& args, std::ostream& out) {
  const fs::path dir(args.dir);
  const fs::path out_dir = args.out_dir.empty() ? dir : fs::path(args.out_dir);
  for (const char* required : {"scenario.toml", "trajectory.csv"}) {
    if (!fs::exists(dir / required)) throw Error("missing artifact '" + (dir / required).string() + "'");
  }
  Scenario sc = parse_scenario(read_file(dir / "scenario.toml"), (dir / "scenario.toml").string());
  std::ifstream tin(dir / "trajectory.csv");
  const TrajectoryCsv traj = read_trajectory_csv(tin, (dir / "trajectory.csv").string());
  const std::vector<json> acts = fs::exists(dir / "activations.jsonl") ? detail::read_jsonl(dir / "activations.jsonl")
                                                                       : std::vector<json>{};
  json witness = nullptr;
  if (fs::exists(dir / "witness.json")) witness = json::parse(read_file(dir / "witness.json")).at("resized");
  make_dir(out_dir);

  if (!fs::exists(dir / "events.jsonl")) {
    PlotScene scene = detail::base_scene(sc, sc.name + ": planned trajectory");
    scene.executed = detail::planar_path(traj.states);
    for (const auto& a : acts) detail::add_activation(scene, a, traj.states);
    scene.critical = detail::critical_marker(witness, traj.states);
    write_file(out_dir / "plot.svg", render_svg(scene));
    out << "wrote " << (out_dir / "plot.svg").string() << '\n';
    return kOk;
  }

  std::vector<PredicateUpdate> updates;
  if (fs::exists(dir / "updates.json")) updates = parse_updates(read_file(dir / "updates.json"), sc, (dir / "updates.json").string());
  const std::vector<json> events = detail::read_jsonl(dir / "events.jsonl");
  const fs::path frames = out_dir / "frames";
  make_dir(frames);
  std::size_t next_update = 0;
  for (const auto& ev : events) {
    const int step = ev.at("step").get<int>();
    while (next_update < updates.size() && update_step(updates[next_update], sc.system.dt) <= step) {
      sc.predicate(updates[next_update].predicate) = updates[next_update].geometry.renamed(updates[next_update].predicate);
      ++next_update;
    }
    std::ostringstream title;
    title << sc.name << ": step " << step << " (t = " << ev.at("time").get<double>() << " s, "
          << ev.at("status").get<std::string>() << ")";
    PlotScene scene = detail::base_scene(sc, title.str());
    const auto plan = detail::states_from_json(ev.at("plan"));
    const std::size_t shown = std::min(plan.size(), static_cast<std::size_t>(step) + 1);
    scene.executed = detail::planar_path({plan.begin(), plan.begin() + static_cast<std::ptrdiff_t>(shown)});
    scene.plan = detail::planar_path(plan);
    scene.plan_violates = ev.at("status") == "infeasible";
    for (const auto& a : ev.at("activations")) detail::add_activation(scene, a, plan);
    scene.critical = detail::critical_marker(ev.at("robustness"), plan);
    char name[32];
    std::snprintf(name, sizeof(name), "step_%03d.svg", step);
    write_file(frames / name, render_svg(scene));
  }
  for (; next_update < updates.size(); ++next_update) {
    sc.predicate(updates[next_update].predicate) = updates[next_update].geometry.renamed(updates[next_update].predicate);
  }
  PlotScene scene = detail::base_scene(sc, sc.name + ": final path taken by the robot");
  scene.executed = detail::planar_path(traj.states);
  for (const auto& a : acts) detail::add_activation(scene, a, traj.states);
  scene.critical = detail::critical_marker(witness, traj.states);
  write_file(out_dir / "path.svg", render_svg(scene));
  out << "wrote " << events.size() << " frames to " << frames.string() << " and " << (out_dir / "path.svg").string()
      << '\n';
  return kOk;
}

}  // namespace mtlsynth::cli
