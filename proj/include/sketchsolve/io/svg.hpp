#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace sketchsolve {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct PlotMarker {
  std::string label;
  double x = 0;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
  std::vector<PlotMarker> markers;  // vertical lines
  int width = 720;
  int height = 480;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

/// Renders a static line plot. Non-positive values are dropped on log axes.
inline std::string render_line_plot(const PlotSpec& spec) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!spec.log_x || x > 0) && (!spec.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : spec.series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;

  const double left = 80, right = 180, top = 40, bottom = 60;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };
  using detail::svg_num;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << detail::svg_escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << svg_num(left) << "\" y=\"" << svg_num(top) << "\" width=\"" << svg_num(pw) << "\" height=\""
    << svg_num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = x0 + (x1 - x0) * i / 5.0;
    const double fy = y0 + (y1 - y0) * i / 5.0;
    const double vx = spec.log_x ? std::pow(10.0, fx) : fx;
    const double vy = spec.log_y ? std::pow(10.0, fy) : fy;
    const double sx = left + pw * i / 5.0;
    const double sy = top + ph * (1.0 - i / 5.0);
    o << "<line x1=\"" << svg_num(sx) << "\" y1=\"" << svg_num(top + ph) << "\" x2=\"" << svg_num(sx) << "\" y2=\""
      << svg_num(top + ph + 5) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << svg_num(sx) << "\" y=\"" << svg_num(top + ph + 18) << "\" text-anchor=\"middle\">"
      << detail::tick_label(vx) << "</text>\n";
    o << "<line x1=\"" << svg_num(left - 5) << "\" y1=\"" << svg_num(sy) << "\" x2=\"" << svg_num(left) << "\" y2=\""
      << svg_num(sy) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << svg_num(left - 8) << "\" y=\"" << svg_num(sy + 4) << "\" text-anchor=\"end\">"
      << detail::tick_label(vy) << "</text>\n";
  }
  o << "<text x=\"" << svg_num(left + pw / 2) << "\" y=\"" << svg_num(spec.height - 15.0)
    << "\" text-anchor=\"middle\">" << detail::svg_escape(spec.x_label) << "</text>\n";
  o << "<text transform=\"translate(18," << svg_num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << detail::svg_escape(spec.y_label) << "</text>\n";

  for (const auto& mk : spec.markers) {
    if (!usable(mk.x, spec.log_y ? 1.0 : 0.0)) continue;
    const double sx = px(mk.x);
    if (sx < left || sx > left + pw) continue;
    o << "<line x1=\"" << svg_num(sx) << "\" y1=\"" << svg_num(top) << "\" x2=\"" << svg_num(sx) << "\" y2=\""
      << svg_num(top + ph) << "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n";
    o << "<text x=\"" << svg_num(sx + 3) << "\" y=\"" << svg_num(top + 12) << "\" fill=\"gray\">"
      << detail::svg_escape(mk.label) << "</text>\n";
  }

  for (std::size_t k = 0; k < spec.series.size(); ++k) {
    const auto& s = spec.series[k];
    const char* color = palette[k % (sizeof palette / sizeof *palette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      points += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i])) + " ";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (s.dashed) o << " stroke-dasharray=\"6,4\"";
    o << " points=\"" << points << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(k) + 8;
    o << "<line x1=\"" << svg_num(left + pw + 12) << "\" y1=\"" << svg_num(ly) << "\" x2=\"" << svg_num(left + pw + 36)
      << "\" y2=\"" << svg_num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << svg_num(left + pw + 42) << "\" y=\"" << svg_num(ly + 4) << "\">" << detail::svg_escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace sketchsolve
