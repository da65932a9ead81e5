#pragma once

// Operator session around the receding-horizon loop: validates client
// commands, tracks the placeholder budget and produces protocol messages.
// Single-threaded; the planner worker is its only caller.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mtlsynth/scenario_io.hpp"
#include "mtlsynth/synthesis.hpp"

namespace mtlsynth::reactive {

inline constexpr int kProtocolVersion = 1;

/// A serialized server message, for one client or for all of them.
struct Outbound {
  std::optional<int> client;
  std::string text;
};

struct SessionOptions {
  RhcOptions rhc;
  double speed = 1.0;
  /// Wait for a resume command before the first step.
  bool start_paused = false;
  /// Called after every step with the event and the runner that produced it.
  std::function<void(const StepEvent&, const RhcRunner&)> on_step;
  /// Called once when a run finishes.
  std::function<void(const RhcResult&, const RhcRunner&)> on_done;
};

inline nlohmann::json points_json(const std::vector<Point2>& pts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : pts) out.push_back({p[0], p[1]});
  return out;
}

inline nlohmann::json states_json(const std::vector<Vector>& xs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& x : xs) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index d = 0; d < x.size(); ++d) row.push_back(x(d));
    out.push_back(row);
  }
  return out;
}

inline nlohmann::json witness_json(const Witness& w, const std::vector<PredicateOccurrence>& occ) {
  return {{"value", w.value},
          {"critical_index", w.critical_index},
          {"critical_occurrence", w.critical_occurrence},
          {"critical_predicate", occ[static_cast<std::size_t>(w.critical_occurrence)].predicate}};
}

/// "safe", "unsafe", "mixed" or "unused" for each predicate name.
inline std::map<std::string, std::string> predicate_polarities(const Scenario& s) {
  std::map<std::string, std::set<Polarity>> seen;
  for (const auto& occ : classify_occurrences(s.nnf())) seen[occ.predicate].insert(occ.polarity);
  std::map<std::string, std::string> out;
  for (const auto& p : s.predicates) {
    const auto it = seen.find(p.name());
    if (it == seen.end()) {
      out[p.name()] = "unused";
    } else if (it->second.size() > 1) {
      out[p.name()] = "mixed";
    } else {
      out[p.name()] = *it->second.begin() == Polarity::Safe ? "safe" : "unsafe";
    }
  }
  return out;
}

/// Geometry record: outline, resized outline and halfspaces.
inline nlohmann::json predicate_json(const Predicate& p, const std::string& polarity, double rho) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < p.faces(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int d = 0; d < p.dim(); ++d) row.push_back(p.A()(i, d));
    a.push_back(row);
  }
  nlohmann::json b = nlohmann::json::array();
  for (int i = 0; i < p.faces(); ++i) b.push_back(p.b()(i));
  nlohmann::json resized = nullptr;
  if (polarity == "safe") resized = points_json(planar_vertices(p.offset(-rho)));
  if (polarity == "unsafe") resized = points_json(planar_vertices(p.offset(rho)));
  return {{"name", p.name()},      {"polarity", polarity}, {"vertices", points_json(planar_vertices(p))},
          {"resized", resized},    {"A", a},               {"b", b}};
}

/// Static description of a scenario with its current geometry.
inline nlohmann::json scenario_json(const Scenario& s) {
  const auto pol = predicate_polarities(s);
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& p : s.predicates) {
    nlohmann::json j = predicate_json(p, pol.at(p.name()), s.rho);
    j["placeholder"] = std::find(s.placeholders.begin(), s.placeholders.end(), p.name()) != s.placeholders.end();
    preds.push_back(j);
  }
  nlohmann::json lo = nlohmann::json::array();
  nlohmann::json hi = nlohmann::json::array();
  for (int d = 0; d < s.workspace.dim(); ++d) {
    lo.push_back(s.workspace.lo(d));
    hi.push_back(s.workspace.hi(d));
  }
  nlohmann::json x0 = nlohmann::json::array();
  for (Eigen::Index d = 0; d < s.x0.size(); ++d) x0.push_back(s.x0(d));
  return {{"name", s.name},
          {"description", s.description},
          {"formula", s.formula_text},
          {"rho", s.rho},
          {"dt", s.system.dt},
          {"horizon", s.horizon()},
          {"initial_state", x0},
          {"workspace", {{"lo", lo}, {"hi", hi}}},
          {"placeholders", s.placeholders},
          {"predicates", preds}};
}

class Session {
public:
  Session(Scenario scenario, SessionOptions options, std::vector<PredicateUpdate> scripted = {})
      : options_(std::move(options)), scripted_(std::move(scripted)) {
    initial_ = scenario;
    start(std::move(scenario));
    paused_ = options_.start_paused;
  }

  /// Snapshot for a newly connected client.
  std::vector<Outbound> join(int client) {
    clients_.insert(client);
    return {directed(client, "snapshot", runner_->step(), snapshot_payload())};
  }

  void leave(int client) { clients_.erase(client); }
  int clients() const { return static_cast<int>(clients_.size()); }

  /// Validates one command frame; replies to the sender and, for a reset,
  /// broadcasts the new snapshot. Invalid commands leave the state unchanged.
  std::vector<Outbound> handle(int client, const std::string& text) {
    nlohmann::json id = nullptr;
    nlohmann::json kind = nullptr;
    try {
      const nlohmann::json cmd = nlohmann::json::parse(text);
      if (!cmd.is_object()) throw Error("command must be a JSON object");
      if (cmd.contains("id")) id = cmd["id"];
      if (cmd.contains("kind")) kind = cmd["kind"];
      if (!cmd.contains("v") || cmd["v"] != kProtocolVersion) {
        throw Error("unsupported protocol version; expected \"v\": " + std::to_string(kProtocolVersion));
      }
      return dispatch(client, cmd, id);
    } catch (const nlohmann::json::exception& e) {
      return {error_reply(client, id, kind, std::string("malformed command: ") + e.what())};
    } catch (const std::exception& e) {
      return {error_reply(client, id, kind, e.what())};
    }
  }

  /// Runs one receding-horizon step and returns the broadcasts it produced:
  /// plan_update (when geometry changed), warnings, step_event and, after the
  /// last step, done.
  std::vector<Outbound> tick() {
    std::vector<Outbound> out;
    if (runner_->done()) return out;
    StepEvent ev = runner_->advance();
    for (const auto& u : ev.applied) {
      PredicateUpdate logged = u;
      logged.time = ev.time;
      log_.push_back(std::move(logged));
    }
    const auto& occ = runner_->encoding().occurrences();
    const auto pol = predicate_polarities(runner_->scenario());
    if (!ev.applied.empty()) {
      nlohmann::json preds = nlohmann::json::array();
      for (const auto& u : ev.applied) {
        preds.push_back(predicate_json(runner_->geometry(u.predicate), pol.at(u.predicate), runner_->scenario().rho));
      }
      out.push_back(broadcast("plan_update", ev.step,
                              {{"predicates", preds},
                               {"plan", states_json(ev.plan)},
                               {"robustness", witness_json(ev.robustness, occ)}}));
    }
    for (const auto& w : ev.warnings) out.push_back(broadcast("warning", ev.step, {{"message", w}}));
    out.push_back(broadcast("step_event", ev.step, to_json(ev, occ)));
    last_event_ = to_json(ev, occ);
    if (options_.on_step) options_.on_step(ev, *runner_);
    if (runner_->done()) {
      const RhcResult r = runner_->result();
      if (options_.on_done) options_.on_done(r, *runner_);
      out.push_back(broadcast("done", ev.step,
                              {{"status", to_string(r.status)},
                               {"infeasible_steps", r.infeasible_steps},
                               {"objective", r.objective},
                               {"resized", witness_json(r.resized, occ)},
                               {"original", witness_json(r.original, occ)},
                               {"trajectory", states_json(r.trajectory.states)},
                               {"inputs", states_json(r.inputs)}}));
    }
    return out;
  }

  nlohmann::json snapshot_payload() const {
    nlohmann::json obstacles = nlohmann::json::object();
    for (const auto& ph : scenario_.placeholders) obstacles[ph] = in_use_.count(ph) > 0;
    return {{"scenario", scenario_json(runner_->scenario())},
            {"executed", states_json(runner_->executed_states())},
            {"plan", states_json(runner_->combined_states())},
            {"last_event", last_event_},
            {"obstacles", obstacles},
            {"pending_updates", runner_->pending_updates()},
            {"paused", paused_},
            {"speed", speed_},
            {"done", runner_->done()}};
  }

  bool paused() const { return paused_; }
  bool done() const { return runner_->done(); }
  bool runnable() const { return !paused_ && !runner_->done(); }
  double speed() const { return speed_; }
  int step() const { return runner_->step(); }
  std::uint64_t seq() const { return seq_; }
  RhcRunner& runner() { return *runner_; }
  const RhcRunner& runner() const { return *runner_; }
  /// Scenario the current run started from.
  const Scenario& initial() const { return initial_; }

  /// Geometry updates in application order, stamped with their step time;
  /// replaying them through `synthesize_rhc` reproduces the run.
  const std::vector<PredicateUpdate>& log() const { return log_; }

private:
  void start(Scenario scenario) {
    if (scenario.placeholders.empty()) {
      throw ScenarioError("placeholders: the reactive server needs at least one placeholder predicate");
    }
    auto runner = std::make_unique<RhcRunner>(scenario, options_.rhc);
    for (const auto& u : scripted_) runner->queue_update(u);
    scenario_ = std::move(scenario);
    runner_ = std::move(runner);
    in_use_.clear();
    declared_.clear();
    log_.clear();
    last_event_ = nullptr;
    speed_ = options_.speed;
  }

  std::vector<Outbound> dispatch(int client, const nlohmann::json& cmd, const nlohmann::json& id) {
    const std::string kind = cmd.at("kind").get<std::string>();
    nlohmann::json ack = {{"id", id}, {"command", kind}};
    if (kind == "pause" || kind == "resume") {
      paused_ = kind == "pause";
      ack["paused"] = paused_;
      return {directed(client, "ack", runner_->step(), ack)};
    }
    if (kind == "set_speed") {
      const double v = cmd.at("speed").get<double>();
      if (!(v > 0.0 && v <= 1000.0)) throw Error("speed must lie in (0, 1000]");
      speed_ = v;
      ack["speed"] = speed_;
      return {directed(client, "ack", runner_->step(), ack)};
    }
    if (kind == "reset") {
      if (cmd.contains("scenario") && !cmd["scenario"].is_null()) {
        Scenario next = parse_scenario(cmd.at("scenario").get<std::string>(), "reset.scenario");
        const auto keep = std::move(scripted_);
        scripted_.clear();
        try {
          start(next);
        } catch (...) {
          scripted_ = keep;
          throw;
        }
        initial_ = std::move(next);
      } else {
        start(initial_);
      }
      paused_ = false;
      return {directed(client, "ack", runner_->step(), ack), broadcast("snapshot", runner_->step(), snapshot_payload())};
    }
    if (kind != "add_obstacle" && kind != "update_obstacle" && kind != "remove_obstacle" && kind != "move_goal") {
      throw Error("unknown command kind '" + kind + "'");
    }
    if (runner_->done()) throw Error("the run has finished; send reset to start again");

    std::string target;
    Predicate geometry;
    if (kind == "add_obstacle") {
      if (cmd.contains("obstacle")) {
        target = placeholder_name(cmd);
        if (in_use_.count(target)) throw Error("obstacle '" + target + "' is already in use");
      } else {
        for (const auto& ph : scenario_.placeholders) {
          if (!in_use_.count(ph)) {
            target = ph;
            break;
          }
        }
        if (target.empty()) {
          throw Error("placeholder budget exhausted: " + std::to_string(scenario_.placeholders.size()) +
                      " obstacle(s) declared");
        }
      }
      geometry = geometry_from(cmd, target);
    } else if (kind == "update_obstacle") {
      target = placeholder_name(cmd);
      if (!in_use_.count(target)) throw Error("obstacle '" + target + "' is not in use");
      geometry = geometry_from(cmd, target);
    } else if (kind == "remove_obstacle") {
      target = placeholder_name(cmd);
      if (!in_use_.count(target)) throw Error("obstacle '" + target + "' is not in use");
      geometry = scenario_.predicate(target);
    } else {
      target = goal_name(cmd);
      if (cmd.contains("offset")) {
        const auto& off = cmd.at("offset");
        if (!off.is_array() || off.size() != 2) throw Error("offset must be [dx, dy]");
        Vector shift = Vector::Zero(scenario_.system.n());
        shift(0) = off.at(0).get<double>();
        shift(1) = off.at(1).get<double>();
        if (!shift.allFinite()) throw Error("offset must be finite");
        geometry = declared(target).translated(shift);
        check_inside_workspace(planar_vertices(geometry), target);
        check_safe_interior(geometry, target);
      } else {
        geometry = geometry_from(cmd, target);
      }
    }

    if (kind == "add_obstacle") in_use_.insert(target);
    if (kind == "remove_obstacle") in_use_.erase(target);
    const int apply_step = runner_->step();
    runner_->queue_update({apply_step * scenario_.system.dt, target, geometry.renamed(target)});
    declared_[target] = geometry.renamed(target);
    ack["predicate"] = target;
    ack["apply_step"] = apply_step;
    return {directed(client, "ack", apply_step, ack)};
  }

  std::string placeholder_name(const nlohmann::json& cmd) const {
    const std::string name = cmd.at("obstacle").get<std::string>();
    if (std::find(scenario_.placeholders.begin(), scenario_.placeholders.end(), name) == scenario_.placeholders.end()) {
      throw Error("'" + name + "' is not a placeholder obstacle");
    }
    return name;
  }

  std::string goal_name(const nlohmann::json& cmd) const {
    const auto pol = predicate_polarities(scenario_);
    if (cmd.contains("predicate")) {
      const std::string name = cmd.at("predicate").get<std::string>();
      if (!scenario_.has_predicate(name)) throw Error("unknown predicate '" + name + "'");
      if (pol.at(name) != "safe") throw Error("predicate '" + name + "' is not a goal (safe) predicate");
      return name;
    }
    std::vector<std::string> goals;
    for (const auto& [name, p] : pol) {
      if (p == "safe") goals.push_back(name);
    }
    if (goals.size() != 1) throw Error("move_goal needs \"predicate\": the scenario has " + std::to_string(goals.size()) + " goal predicates");
    return goals[0];
  }

  const Predicate& declared(const std::string& name) const {
    const auto it = declared_.find(name);
    return it != declared_.end() ? it->second : runner_->geometry(name);
  }

  void check_inside_workspace(const std::vector<Point2>& pts, const std::string& name) const {
    const Box& w = scenario_.workspace;
    for (const auto& p : pts) {
      if (p[0] < w.lo(0) - 1e-9 || p[0] > w.hi(0) + 1e-9 || p[1] < w.lo(1) - 1e-9 || p[1] > w.hi(1) + 1e-9) {
        throw Error("geometry for '" + name + "' leaves the workspace");
      }
    }
  }

  void check_safe_interior(const Predicate& g, const std::string& name) const {
    if (predicate_polarities(scenario_).at(name) == "safe" && !(chebyshev_radius(g.offset(-scenario_.rho)) > 1e-9)) {
      throw Error("geometry for '" + name + "' is empty after shrinking by rho");
    }
  }

  /// Convex, non-degenerate polygon inside the workspace, padded to the face
  /// count the encoding reserved for `name`.
  Predicate geometry_from(const nlohmann::json& cmd, const std::string& name) const {
    const auto& v = cmd.at("vertices");
    if (!v.is_array() || v.size() < 3 || v.size() > 64) throw Error("vertices must list 3 to 64 [x, y] points");
    std::vector<Point2> pts;
    for (const auto& p : v) {
      if (!p.is_array() || p.size() != 2) throw Error("each vertex must be [x, y]");
      const Point2 q{p.at(0).get<double>(), p.at(1).get<double>()};
      if (!std::isfinite(q[0]) || !std::isfinite(q[1])) throw Error("vertices must be finite");
      pts.push_back(q);
    }
    const auto hull = detail::convex_hull(pts);
    if (hull.size() != pts.size()) throw Error("vertices must be distinct and in convex position");
    double area = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const auto& p = hull[i];
      const auto& q = hull[(i + 1) % hull.size()];
      area += p[0] * q[1] - q[0] * p[1];
    }
    if (!(std::abs(area) > 1e-9)) throw Error("polygon has zero area");
    check_inside_workspace(pts, name);
    const int faces = scenario_.predicate(name).faces();
    if (static_cast<int>(hull.size()) > faces) {
      throw Error("polygon has " + std::to_string(hull.size()) + " faces; '" + name + "' allows at most " +
                  std::to_string(faces));
    }
    const Predicate g = Predicate::from_vertices_2d(name, pts, scenario_.system.n()).padded_to(faces);
    check_safe_interior(g, name);
    return g;
  }

  Outbound envelope(std::optional<int> client, const std::string& kind, int step, nlohmann::json payload) const {
    const nlohmann::json m = {{"v", kProtocolVersion}, {"seq", seq_}, {"step", step}, {"kind", kind}, {"payload", std::move(payload)}};
    return {client, m.dump()};
  }

  Outbound broadcast(const std::string& kind, int step, nlohmann::json payload) {
    ++seq_;
    return envelope(std::nullopt, kind, step, std::move(payload));
  }

  Outbound directed(int client, const std::string& kind, int step, nlohmann::json payload) const {
    return envelope(client, kind, step, std::move(payload));
  }

  Outbound error_reply(int client, const nlohmann::json& id, const nlohmann::json& kind, const std::string& msg) const {
    return directed(client, "error", runner_->step(), {{"id", id}, {"command", kind}, {"message", msg}});
  }

  SessionOptions options_;
  std::vector<PredicateUpdate> scripted_;
  Scenario initial_;
  Scenario scenario_;
  std::unique_ptr<RhcRunner> runner_;
  std::set<std::string> in_use_;
  std::map<std::string, Predicate> declared_;
  std::vector<PredicateUpdate> log_;
  nlohmann::json last_event_ = nullptr;
  std::set<int> clients_;
  std::uint64_t seq_ = 0;
  bool paused_ = false;
  double speed_ = 1.0;
};

}  // namespace mtlsynth::reactive
