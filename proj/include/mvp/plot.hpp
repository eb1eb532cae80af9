#pragma once

// SVG review plots from a telemetry log: horizontal track, depth (desired
// and actual) against time, and thruster commands against time.

#include "mvp/telemetry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace mvp::plot {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool equal_axes = false;
  bool invert_y = false;
};

inline constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string render_panel(const Panel& p, double ox, double oy, double w, double h) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;
  const double pad_l = 60, pad_r = 20, pad_t = 30, pad_b = 40;
  const double pw = w - pad_l - pad_r, ph = h - pad_t - pad_b;
  double sx = pw / (x1 - x0), sy = ph / (y1 - y0);
  if (p.equal_axes) sx = sy = std::min(sx, sy);
  auto px = [&](double x) { return ox + pad_l + (x - x0) * sx; };
  auto py = [&](double y) { return p.invert_y ? oy + pad_t + (y - y0) * sy : oy + pad_t + ph - (y - y0) * sy; };

  std::ostringstream o;
  o.precision(6);
  o << "<g>\n<rect x='" << ox + pad_l << "' y='" << oy + pad_t << "' width='" << pw << "' height='" << ph
    << "' fill='none' stroke='#444'/>\n";
  o << "<text x='" << ox + w / 2 << "' y='" << oy + 18 << "' text-anchor='middle' font-size='14'>" << p.title
    << "</text>\n";
  o << "<text x='" << ox + pad_l + pw / 2 << "' y='" << oy + h - 8 << "' text-anchor='middle' font-size='11'>"
    << p.x_label << "</text>\n";
  o << "<text x='" << ox + 14 << "' y='" << oy + pad_t + ph / 2 << "' text-anchor='middle' font-size='11' "
    << "transform='rotate(-90 " << ox + 14 << ' ' << oy + pad_t + ph / 2 << ")'>" << p.y_label << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    o << "<text x='" << px(xv) << "' y='" << oy + pad_t + ph + 14 << "' text-anchor='middle' font-size='9'>" << xv
      << "</text>\n";
    o << "<text x='" << ox + pad_l - 4 << "' y='" << py(yv) + 3 << "' text-anchor='end' font-size='9'>" << yv
      << "</text>\n";
  }
  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    o << "<polyline fill='none' stroke-width='1.2' stroke='" << s.color << "' points='";
    for (const auto& [x, y] : s.points) o << px(x) << ',' << py(y) << ' ';
    o << "'/>\n";
    o << "<text x='" << ox + pad_l + 8 << "' y='" << oy + pad_t + 14 + 12.0 * static_cast<double>(k)
      << "' font-size='10' fill='" << s.color << "'>" << s.label << "</text>\n";
  }
  o << "</g>\n";
  return o.str();
}

inline std::string render(const std::vector<Panel>& panels, double width = 900, double panel_height = 320) {
  std::ostringstream o;
  const double h = panel_height * static_cast<double>(panels.size());
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << h << "' viewBox='0 0 " << width
    << ' ' << h << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    o << render_panel(panels[i], 0, panel_height * static_cast<double>(i), width, panel_height);
  o << "</svg>\n";
  return o.str();
}

/// Track, depth and thruster-command panels for a log.
inline std::vector<Panel> panels_from_log(const telemetry::Log& log) {
  Panel track{"Horizontal track", "x [m]", "y [m]", {}, true, false};
  Series truth{"truth", kPalette[1], {}}, odom{"odometry", kPalette[0], {}};
  Panel depth{"Depth", "t [s]", "depth [m]", {}, false, true};
  Series actual{"actual", kPalette[1], {}}, desired{"desired", kPalette[0], {}};
  Panel cmds{"Thruster commands", "t [s]", "command", {}, false, false};
  std::vector<Series> per_thruster;
  if (log.header.contains("thrusters"))
    for (std::size_t i = 0; i < log.header["thrusters"].size(); ++i)
      per_thruster.push_back({log.header["thrusters"][i].get<std::string>(), kPalette[i % kPalette.size()], {}});

  for (const auto& r : log.records) {
    const double t = r.value("t", 0.0);
    const auto& tp = r["truth"]["position"];
    truth.points.emplace_back(tp[0].get<double>(), tp[1].get<double>());
    const auto& op = r["odom"]["position"];
    odom.points.emplace_back(op[0].get<double>(), op[1].get<double>());
    actual.points.emplace_back(t, r["truth"]["depth"].get<double>());
    if (r["setpoint"].contains("depth")) desired.points.emplace_back(t, r["setpoint"]["depth"].get<double>());
    const auto& th = r["thrusters"];
    for (std::size_t i = 0; i < th.size() && i < per_thruster.size(); ++i)
      per_thruster[i].points.emplace_back(t, th[i]["command"].get<double>());
  }
  track.series = {truth, odom};
  depth.series = {actual, desired};
  cmds.series = per_thruster;
  return {track, depth, cmds};
}

}  // namespace mvp::plot
