#pragma once

// CPLEX-style LP text dump of a Model.

#include <charconv>
#include <cmath>
#include <sstream>
#include <string>

#include "mtlsynth/milp/model.hpp"

namespace mtlsynth::milp {

namespace detail {

inline std::string lp_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string lp_name(const std::string& name, char prefix, int id) {
  return name.empty() ? std::string(1, prefix) + std::to_string(id) : name;
}

inline void lp_terms(std::ostringstream& os, const Model& model, const std::vector<Term>& terms) {
  if (terms.empty()) {
    os << " 0 " << lp_name(model.variable(0).name, 'x', 0);
    return;
  }
  bool first = true;
  for (const auto& t : terms) {
    const double a = std::abs(t.coef);
    os << (t.coef < 0 ? (first ? " -" : " - ") : (first ? " " : " + "));
    if (a != 1.0) os << lp_number(a) << ' ';
    os << lp_name(model.variable(t.var).name, 'x', t.var);
    first = false;
  }
}

}  // namespace detail

/// Active rows become constraints; inactive rows are emitted as comments when
/// `include_inactive` is set so lazy and full encodings can be diffed.
inline std::string to_lp_format(const Model& model, bool include_inactive = false) {
  std::ostringstream os;
  os << "Minimize\n obj:";
  std::vector<Term> obj;
  for (int j = 0; j < model.num_variables(); ++j) {
    if (model.objective()[static_cast<std::size_t>(j)] != 0.0) obj.push_back({j, model.objective()[static_cast<std::size_t>(j)]});
  }
  if (model.num_variables() > 0) detail::lp_terms(os, model, obj);
  os << "\nSubject To\n";
  for (int i = 0; i < model.num_rows(); ++i) {
    const Row& r = model.row(i);
    if (!r.active && !include_inactive) continue;
    os << (r.active ? " " : "\\ inactive ") << detail::lp_name(r.name, 'c', i) << ":";
    detail::lp_terms(os, model, r.terms);
    os << (r.relation == Relation::LessEqual ? " <= " : r.relation == Relation::Equal ? " = " : " >= ")
       << detail::lp_number(r.rhs) << '\n';
  }
  os << "Bounds\n";
  for (int j = 0; j < model.num_variables(); ++j) {
    const Variable& v = model.variable(j);
    if (v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0) continue;
    const std::string name = detail::lp_name(v.name, 'x', j);
    if (std::isinf(v.lower) && std::isinf(v.upper)) {
      os << ' ' << name << " free\n";
    } else if (v.lower == v.upper) {
      os << ' ' << name << " = " << detail::lp_number(v.lower) << '\n';
    } else {
      os << ' ' << (std::isinf(v.lower) ? std::string("-inf") : detail::lp_number(v.lower)) << " <= " << name << " <= "
         << (std::isinf(v.upper) ? std::string("+inf") : detail::lp_number(v.upper)) << '\n';
    }
  }
  bool header = false;
  for (int j = 0; j < model.num_variables(); ++j) {
    if (model.variable(j).kind != VarKind::Binary) continue;
    if (!header) os << "Binaries\n";
    header = true;
    os << ' ' << detail::lp_name(model.variable(j).name, 'x', j) << '\n';
  }
  os << "End\n";
  return os.str();
}

}  // namespace mtlsynth::milp
