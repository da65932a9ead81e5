#pragma once

// Standalone SVG figures: workspace, predicates with their resized outlines,
// executed path, planned path and activation markers.

#include <cstdio>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtlsynth/predicate.hpp"
#include "mtlsynth/scenario.hpp"

namespace mtlsynth {

struct PlotMarker {
  Point2 at;
  std::string label;
};

struct PlotScene {
  std::string title;
  Box workspace;
  double rho = 0.0;
  /// Current geometry, with "safe" / "unsafe" / "mixed" / "unused" polarity.
  std::vector<std::pair<Predicate, std::string>> predicates;
  std::vector<Point2> executed;
  std::vector<Point2> plan;
  /// Plan drawn in the warning colour.
  bool plan_violates = false;
  std::vector<PlotMarker> activations;
  std::optional<PlotMarker> critical;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Renders `scene` at `scale` pixels per unit.
inline std::string render_svg(const PlotScene& scene, double scale = 60.0) {
  using detail::svg_num;
  const double margin = 30.0;
  const double x0 = scene.workspace.lo(0);
  const double y0 = scene.workspace.lo(1);
  const double w = (scene.workspace.hi(0) - x0) * scale;
  const double h = (scene.workspace.hi(1) - y0) * scale;
  const auto px = [&](const Point2& p) { return svg_num(margin + (p[0] - x0) * scale) + "," + svg_num(margin + h - (p[1] - y0) * scale); };
  const auto points = [&](const std::vector<Point2>& pts) {
    std::string s;
    for (std::size_t i = 0; i < pts.size(); ++i) s += (i ? " " : "") + px(pts[i]);
    return s;
  };
  const Predicate clip = rectangle("clip", {scene.workspace.lo(0), scene.workspace.lo(1)},
                                   {scene.workspace.hi(0), scene.workspace.hi(1)}, 2);
  // Outline clipped to the workspace, in planar coordinates.
  const auto clipped = [&](const Predicate& p) {
    const auto outline = planar_vertices(p);
    if (outline.empty()) return outline;
    Matrix a(p.faces() + 4, 2);
    Vector b(p.faces() + 4);
    int rows = 0;
    for (int i = 0; i < p.faces(); ++i) {
      double other = 0.0;
      for (int d = 2; d < p.dim(); ++d) other += std::abs(p.A()(i, d));
      if (other != 0.0) continue;
      a.row(rows) << p.A()(i, 0), p.A()(i, 1);
      b(rows++) = p.b()(i);
    }
    for (int i = 0; i < 4; ++i) {
      a.row(rows) = clip.A().row(i);
      b(rows++) = clip.b()(i);
    }
    return planar_vertices(Predicate::from_halfspaces(p.name(), a.topRows(rows), b.head(rows)));
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_num(w + 2 * margin) << "\" height=\""
     << svg_num(h + 2 * margin + 20) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << svg_num(margin) << "\" y=\"" << svg_num(margin) << "\" width=\"" << svg_num(w) << "\" height=\""
     << svg_num(h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!scene.title.empty()) {
    os << "<text x=\"" << svg_num(margin) << "\" y=\"" << svg_num(margin - 10) << "\">" << detail::svg_escape(scene.title)
       << "</text>\n";
  }
  for (const auto& [p, polarity] : scene.predicates) {
    const auto outline = clipped(p);
    if (outline.empty()) continue;
    const bool unsafe = polarity == "unsafe";
    const std::string colour = unsafe ? "#d62728" : polarity == "safe" ? "#2ca02c" : "#7f7f7f";
    os << "<polygon points=\"" << points(outline) << "\" fill=\"" << colour << "\" fill-opacity=\"0.35\" stroke=\""
       << colour << "\"/>\n";
    if (polarity == "safe" || unsafe) {
      const auto resized = clipped(p.offset(unsafe ? scene.rho : -scene.rho));
      if (!resized.empty()) {
        os << "<polygon points=\"" << points(resized) << "\" fill=\"none\" stroke=\"" << colour
           << "\" stroke-dasharray=\"6,4\"/>\n";
      }
    }
    const auto& c = outline.front();
    os << "<text x=\"" << svg_num(margin + (c[0] - x0) * scale + 3) << "\" y=\"" << svg_num(margin + h - (c[1] - y0) * scale - 3)
       << "\" fill=\"" << colour << "\">" << detail::svg_escape(p.name()) << "</text>\n";
  }
  if (scene.plan.size() > 1) {
    os << "<polyline points=\"" << points(scene.plan) << "\" fill=\"none\" stroke=\""
       << (scene.plan_violates ? "#ff7f0e" : "#1f77b4") << "\" stroke-width=\"1.5\" stroke-dasharray=\"4,3\"/>\n";
  }
  if (!scene.executed.empty()) {
    if (scene.executed.size() > 1) {
      os << "<polyline points=\"" << points(scene.executed) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    for (const auto& p : scene.executed) {
      const auto xy = px(p);
      const auto comma = xy.find(',');
      os << "<circle cx=\"" << xy.substr(0, comma) << "\" cy=\"" << xy.substr(comma + 1) << "\" r=\"2.5\"/>\n";
    }
  }
  for (const auto& m : scene.activations) {
    const double cx = margin + (m.at[0] - x0) * scale;
    const double cy = margin + h - (m.at[1] - y0) * scale;
    os << "<path d=\"M" << svg_num(cx - 4) << "," << svg_num(cy - 4) << " L" << svg_num(cx + 4) << "," << svg_num(cy + 4)
       << " M" << svg_num(cx - 4) << "," << svg_num(cy + 4) << " L" << svg_num(cx + 4) << "," << svg_num(cy - 4)
       << "\" stroke=\"#9467bd\" stroke-width=\"1.5\"><title>" << detail::svg_escape(m.label) << "</title></path>\n";
  }
  if (scene.critical) {
    const double cx = margin + (scene.critical->at[0] - x0) * scale;
    const double cy = margin + h - (scene.critical->at[1] - y0) * scale;
    os << "<circle cx=\"" << svg_num(cx) << "\" cy=\"" << svg_num(cy) << "\" r=\"7\" fill=\"none\" stroke=\"#ff7f0e\" "
       << "stroke-width=\"2\"><title>" << detail::svg_escape(scene.critical->label) << "</title></circle>\n";
  }
  os << "<text x=\"" << svg_num(margin) << "\" y=\"" << svg_num(h + 2 * margin + 8)
     << "\">solid: executed; dashed: plan; dashed outlines: resized sets; x: activations</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace mtlsynth
