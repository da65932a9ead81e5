#pragma once

// Scenario files (TOML), scripted predicate-update files (JSON) and the
// trajectory CSV reader.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "mtlsynth/dynamics.hpp"
#include "mtlsynth/encoding.hpp"
#include "mtlsynth/error.hpp"
#include "mtlsynth/predicate.hpp"
#include "mtlsynth/scenario.hpp"
#include "mtlsynth/synthesis.hpp"

namespace mtlsynth {

namespace detail {

/// Shortest decimal that parses back to the same double.
inline std::string shortest(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

inline std::string toml_vector(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + shortest(v(i));
  return out + "]";
}

inline std::string toml_matrix(const Matrix& m, const std::string& indent) {
  std::string out = "[\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) out += indent + "  " + toml_vector(m.row(r).transpose()) + ",\n";
  return out + indent + "]";
}

class TomlReader {
public:
  TomlReader(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return t_.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ScenarioError(where(key) + ": " + msg);
  }

  std::string str(const std::string& key, std::optional<std::string> fallback = std::nullopt) const {
    const toml::node* n = t_.get(key);
    if (!n) {
      if (fallback) return *fallback;
      fail(key, "missing");
    }
    if (auto v = n->value<std::string>()) return *v;
    fail(key, "expected a string");
  }

  double num(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    const toml::node* n = t_.get(key);
    if (!n) {
      if (fallback) return *fallback;
      fail(key, "missing");
    }
    return number(*n, key);
  }

  std::optional<int> opt_int(const std::string& key) const {
    const toml::node* n = t_.get(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<int64_t>()) return static_cast<int>(*v);
    fail(key, "expected an integer");
  }

  Vector vec(const std::string& key) const {
    const toml::node* n = t_.get(key);
    if (!n) fail(key, "missing");
    return vector_of(*n, key);
  }

  Matrix mat(const std::string& key) const {
    const toml::node* n = t_.get(key);
    if (!n || !n->is_array()) fail(key, "expected an array of rows");
    const auto& arr = *n->as_array();
    Matrix m;
    for (std::size_t r = 0; r < arr.size(); ++r) {
      const Vector row = vector_of(arr[r], key + "[" + std::to_string(r) + "]");
      if (r == 0) m.resize(static_cast<Eigen::Index>(arr.size()), row.size());
      if (row.size() != m.cols()) fail(key, "rows have different lengths");
      m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
  }

  std::vector<std::string> strings(const std::string& key) const {
    std::vector<std::string> out;
    const toml::node* n = t_.get(key);
    if (!n) return out;
    if (!n->is_array()) fail(key, "expected an array of strings");
    for (const auto& e : *n->as_array()) {
      auto v = e.value<std::string>();
      if (!v) fail(key, "expected an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  TomlReader sub(const std::string& key) const {
    const toml::node* n = t_.get(key);
    if (!n || !n->is_table()) fail(key, "expected a table");
    return TomlReader(*n->as_table(), where(key));
  }

  const toml::table& table() const { return t_; }

private:
  double number(const toml::node& n, const std::string& key) const {
    if (auto v = n.value_exact<double>()) return *v;
    if (auto v = n.value_exact<int64_t>()) return static_cast<double>(*v);
    if (auto v = n.value<std::string>()) {
      if (*v == "inf") return std::numeric_limits<double>::infinity();
      if (*v == "-inf") return -std::numeric_limits<double>::infinity();
    }
    fail(key, "expected a number");
  }

  Vector vector_of(const toml::node& n, const std::string& key) const {
    if (!n.is_array()) fail(key, "expected an array of numbers");
    const auto& arr = *n.as_array();
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(arr[i], key);
    return v;
  }

  const toml::table& t_;
  std::string path_;
};

/// Checks that the coordinates a predicate constrains are bounded.
inline void check_bounded(const Predicate& p, const std::string& where) {
  for (int d = 0; d < p.dim(); ++d) {
    if (p.A().col(d).cwiseAbs().maxCoeff() == 0.0) continue;
    for (double sign : {1.0, -1.0}) {
      milp::Model m;
      std::vector<int> xs;
      for (int j = 0; j < p.dim(); ++j) xs.push_back(m.add_variable(-milp::kInf, milp::kInf));
      for (int i = 0; i < p.faces(); ++i) {
        std::vector<milp::Term> terms;
        for (int j = 0; j < p.dim(); ++j) {
          if (p.A()(i, j) != 0.0) terms.push_back({xs[static_cast<std::size_t>(j)], p.A()(i, j)});
        }
        m.add_row(terms, milp::Relation::LessEqual, p.b()(i));
      }
      m.set_objective({{xs[static_cast<std::size_t>(d)], -sign}});
      const milp::Solution s = milp::solve_lp(m);
      if (s.status == milp::Status::Unbounded) throw ScenarioError(where + ": predicate set is unbounded");
      if (s.status == milp::Status::Infeasible) throw ScenarioError(where + ": predicate set is empty");
    }
  }
}

/// Predicate from a table holding either `vertices` (planar, on `dims`) or `A` and `b`.
inline Predicate read_geometry(const TomlReader& r, const std::string& name, int state_dim) {
  Predicate p;
  try {
    if (r.has("vertices")) {
      const Matrix v = r.mat("vertices");
      if (v.cols() != 2) r.fail("vertices", "expected [x, y] pairs");
      std::array<int, 2> dims{0, 1};
      if (r.has("dims")) {
        const Vector d = r.vec("dims");
        if (d.size() != 2) r.fail("dims", "expected two coordinate indices");
        dims = {static_cast<int>(d(0)), static_cast<int>(d(1))};
      }
      std::vector<Point2> pts;
      for (Eigen::Index i = 0; i < v.rows(); ++i) pts.push_back({v(i, 0), v(i, 1)});
      p = Predicate::from_vertices_2d(name, pts, state_dim, dims);
    } else if (r.has("A")) {
      const Matrix a = r.mat("A");
      const Vector b = r.vec("b");
      if (a.cols() != state_dim) r.fail("A", "expected " + std::to_string(state_dim) + " columns");
      p = Predicate::from_halfspaces(name, a, b);
    } else {
      r.fail("vertices", "predicate needs `vertices` or `A` and `b`");
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError(r.where("geometry") + ": " + e.what());
  }
  check_bounded(p, r.where("geometry"));
  if (chebyshev_radius(p) <= 0.0) throw ScenarioError(r.where("geometry") + ": predicate set has no interior");
  return p;
}

}  // namespace detail

/// Parses scenario text. `source` labels error messages.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "scenario") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw ScenarioError(source + ":" + std::to_string(b.line) + ":" + std::to_string(b.column) + ": " +
                        std::string(e.description()));
  }
  const detail::TomlReader r(root, "");
  Scenario s;
  s.name = r.str("name", std::string{});
  s.description = r.str("description", std::string{});
  s.formula_text = r.str("formula");
  s.rho = r.num("rho", 0.0);
  s.horizon_override = r.opt_int("horizon");
  s.placeholders = r.strings("placeholders");

  const auto dyn = r.sub("dynamics");
  s.dynamics_kind = dyn.str("kind", std::string("double_integrator_2d"));
  const double dt = dyn.num("dt");
  if (!(dt > 0.0)) dyn.fail("dt", "must be positive");
  if (s.dynamics_kind == "double_integrator_2d") {
    s.system = double_integrator_2d(dt, dyn.num("u_max", std::numeric_limits<double>::infinity()));
  } else if (s.dynamics_kind == "explicit") {
    s.system.dt = dt;
    s.system.A = dyn.mat("A");
    s.system.B = dyn.mat("B");
    s.system.u_lo = dyn.vec("u_lo");
    s.system.u_hi = dyn.vec("u_hi");
    s.system.state_labels = dyn.strings("state_labels");
    s.system.input_labels = dyn.strings("input_labels");
  } else {
    dyn.fail("kind", "unknown dynamics kind '" + s.dynamics_kind + "'");
  }
  try {
    s.system.validate();
  } catch (const Error& e) {
    throw ScenarioError(std::string("dynamics: ") + e.what());
  }

  const auto ws = r.sub("workspace");
  s.workspace = {ws.vec("lo"), ws.vec("hi")};
  s.x0 = r.vec("initial_state");
  s.weights = r.has("weights") ? r.vec("weights") : Vector::Ones(s.system.m());
  if (r.has("rhc")) s.rhc_deadline = r.sub("rhc").num("deadline", 0.5);

  const toml::node* preds = root.get("predicates");
  if (!preds || !preds->is_array_of_tables()) throw ScenarioError("predicates: expected [[predicates]] tables");
  const auto& arr = *preds->as_array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const detail::TomlReader pr(*arr[i].as_table(), "predicates[" + std::to_string(i) + "]");
    const std::string pname = pr.str("name");
    s.predicates.push_back(detail::read_geometry(pr, pname, s.system.n()));
  }
  s.validate();
  return s;
}

/// Predicates with an optional formula and rho; a full scenario file also
/// qualifies.
struct PredicateFile {
  std::vector<Predicate> predicates;
  std::optional<std::string> formula;
  double rho = 0.0;
};

inline PredicateFile parse_predicate_file(const std::string& text, int state_dim, const std::string& source = "predicates") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw ScenarioError(source + ":" + std::to_string(b.line) + ":" + std::to_string(b.column) + ": " +
                        std::string(e.description()));
  }
  const detail::TomlReader r(root, "");
  PredicateFile out;
  if (r.has("formula")) out.formula = r.str("formula");
  out.rho = r.num("rho", 0.0);
  if (!(out.rho >= 0.0)) r.fail("rho", "must be non-negative");
  const toml::node* preds = root.get("predicates");
  if (!preds || !preds->is_array_of_tables()) throw ScenarioError(source + ": predicates: expected [[predicates]] tables");
  const auto& arr = *preds->as_array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const detail::TomlReader pr(*arr[i].as_table(), "predicates[" + std::to_string(i) + "]");
    out.predicates.push_back(detail::read_geometry(pr, pr.str("name"), state_dim));
  }
  return out;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

/// Writes the scenario with every predicate in halfspace form.
inline void write_scenario(std::ostream& os, const Scenario& s) {
  using detail::shortest;
  using detail::toml_string;
  os << "name = " << toml_string(s.name) << "\n";
  if (!s.description.empty()) os << "description = " << toml_string(s.description) << "\n";
  os << "formula = " << toml_string(s.formula_text) << "\n";
  os << "rho = " << shortest(s.rho) << "\n";
  if (s.horizon_override) os << "horizon = " << *s.horizon_override << "\n";
  if (!s.placeholders.empty()) {
    os << "placeholders = [";
    for (std::size_t i = 0; i < s.placeholders.size(); ++i) os << (i ? ", " : "") << toml_string(s.placeholders[i]);
    os << "]\n";
  }
  os << "initial_state = " << detail::toml_vector(s.x0) << "\n";
  os << "weights = " << detail::toml_vector(s.weights) << "\n";
  os << "\n[dynamics]\nkind = " << toml_string(s.dynamics_kind) << "\ndt = " << shortest(s.system.dt) << "\n";
  if (s.dynamics_kind == "double_integrator_2d") os << "u_max = " << shortest(s.system.u_hi(0)) << "\n";
  if (s.dynamics_kind == "explicit") {
    os << "A = " << detail::toml_matrix(s.system.A, "") << "\n";
    os << "B = " << detail::toml_matrix(s.system.B, "") << "\n";
    os << "u_lo = " << detail::toml_vector(s.system.u_lo) << "\n";
    os << "u_hi = " << detail::toml_vector(s.system.u_hi) << "\n";
  }
  os << "\n[workspace]\nlo = " << detail::toml_vector(s.workspace.lo) << "\nhi = " << detail::toml_vector(s.workspace.hi)
     << "\n";
  os << "\n[rhc]\ndeadline = " << shortest(s.rhc_deadline) << "\n";
  for (const auto& p : s.predicates) {
    os << "\n[[predicates]]\nname = " << toml_string(p.name()) << "\n";
    os << "A = " << detail::toml_matrix(p.A(), "") << "\n";
    os << "b = " << detail::toml_vector(p.b()) << "\n";
  }
}

inline std::string scenario_to_string(const Scenario& s) {
  std::ostringstream os;
  write_scenario(os, s);
  return os.str();
}

inline bool operator==(const Box& x, const Box& y) { return x.lo == y.lo && x.hi == y.hi; }

inline bool same_scenario(const Scenario& x, const Scenario& y) {
  return x.name == y.name && x.description == y.description && x.dynamics_kind == y.dynamics_kind &&
         x.system.A == y.system.A && x.system.B == y.system.B && x.system.dt == y.system.dt &&
         x.system.u_lo == y.system.u_lo && x.system.u_hi == y.system.u_hi && x.workspace == y.workspace &&
         x.predicates == y.predicates && x.placeholders == y.placeholders && x.formula_text == y.formula_text &&
         x.rho == y.rho && x.weights == y.weights && x.horizon_override == y.horizon_override && x.x0 == y.x0 &&
         x.rhc_deadline == y.rhc_deadline;
}

// ----- scripted updates -----

/// `{"updates": [{"time": 7.5, "predicate": "unsafe2", "vertices": [[x, y], ...]}]}`;
/// `"A"`/`"b"` may replace `"vertices"`.
inline std::vector<PredicateUpdate> parse_updates(const std::string& text, const Scenario& s,
                                                  const std::string& source = "events") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(source + ": " + e.what());
  }
  const nlohmann::json& list = j.is_array() ? j : j.value("updates", nlohmann::json::array());
  if (!list.is_array()) throw ScenarioError(source + ": updates: expected an array");
  std::vector<PredicateUpdate> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = source + ": updates[" + std::to_string(i) + "]";
    try {
      const auto& e = list[i];
      PredicateUpdate u;
      u.time = e.at("time").get<double>();
      if (!(u.time >= 0.0)) throw ScenarioError(where + ".time: must be non-negative");
      u.predicate = e.at("predicate").get<std::string>();
      if (!s.has_predicate(u.predicate)) throw ScenarioError(where + ".predicate: unknown predicate '" + u.predicate + "'");
      toml::table t;
      if (e.contains("vertices")) {
        toml::array verts;
        for (const auto& v : e.at("vertices")) verts.push_back(toml::array{v.at(0).get<double>(), v.at(1).get<double>()});
        t.insert("vertices", verts);
        if (e.contains("dims")) t.insert("dims", toml::array{e["dims"].at(0).get<int64_t>(), e["dims"].at(1).get<int64_t>()});
      } else {
        toml::array rows;
        for (const auto& row : e.at("A")) {
          toml::array r;
          for (const auto& x : row) r.push_back(x.get<double>());
          rows.push_back(r);
        }
        toml::array b;
        for (const auto& x : e.at("b")) b.push_back(x.get<double>());
        t.insert("A", rows);
        t.insert("b", b);
      }
      u.geometry = detail::read_geometry(detail::TomlReader(t, where), u.predicate, s.system.n());
      out.push_back(std::move(u));
    } catch (const nlohmann::json::exception& ex) {
      throw ScenarioError(where + ": " + ex.what());
    }
  }
  return out;
}

inline std::vector<PredicateUpdate> load_updates(const std::string& path, const Scenario& s) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open events file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_updates(ss.str(), s, path);
}

/// Updates in the `parse_updates` format, geometry in halfspace form.
inline nlohmann::json updates_to_json(const std::vector<PredicateUpdate>& updates) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& u : updates) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < u.geometry.faces(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int d = 0; d < u.geometry.dim(); ++d) row.push_back(u.geometry.A()(i, d));
      a.push_back(row);
    }
    nlohmann::json b = nlohmann::json::array();
    for (int i = 0; i < u.geometry.faces(); ++i) b.push_back(u.geometry.b()(i));
    list.push_back({{"time", u.time}, {"predicate", u.predicate}, {"A", a}, {"b", b}});
  }
  return {{"updates", list}};
}

// ----- trajectory CSV -----

struct TrajectoryCsv {
  std::vector<Vector> states;
  std::vector<Vector> inputs;
  double dt = 0.0;
};

/// Reads the `k,t,x,y,vx,vy,ux,uy` format; dt comes from the time column.
inline TrajectoryCsv read_trajectory_csv(std::istream& in, const std::string& source = "trajectory") {
  TrajectoryCsv out;
  std::string line;
  if (!std::getline(in, line)) throw Error(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "k,t,x,y,vx,vy,ux,uy") throw Error(source + ": unexpected header '" + line + "'");
  std::vector<double> times;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (cells.size() != 8) throw Error(source + ":" + std::to_string(lineno) + ": expected 8 columns");
    auto num = [&](std::size_t i) {
      double v = 0.0;
      const auto* b = cells[i].data();
      const auto res = std::from_chars(b, b + cells[i].size(), v);
      if (res.ec != std::errc() || res.ptr != b + cells[i].size()) {
        throw Error(source + ":" + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
      return v;
    };
    times.push_back(num(1));
    Vector x(4);
    for (int d = 0; d < 4; ++d) x(d) = num(static_cast<std::size_t>(2 + d));
    out.states.push_back(x);
    if (!cells[6].empty()) {
      Vector u(2);
      u << num(6), num(7);
      out.inputs.push_back(u);
    }
  }
  if (out.states.empty()) throw Error(source + ": no samples");
  out.dt = times.size() > 1 ? times[1] - times[0] : 1.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - times[k - 1] - out.dt) > 1e-9) throw Error(source + ": non-uniform time column");
  }
  return out;
}

}  // namespace mtlsynth
