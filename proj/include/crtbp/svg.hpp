// Minimal deterministic SVG plotting: fixed canvas, fixed number formatting,
// no timestamps, so identical data gives identical bytes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "crtbp/dynamics.hpp"

namespace crtbp::svg {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Style { Line, Scatter, Outline, Marker };

struct Series {
  std::string name;
  Style style = Style::Line;
  std::vector<Point2> points;
  std::string color = "#1f77b4";
  double size = 2.0;  // stroke width or marker radius
};

inline std::string num(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string px(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  Plot& add(Series s) {
    series_.push_back(std::move(s));
    return *this;
  }
  Plot& equal_aspect(bool on = true) {
    equal_ = on;
    return *this;
  }

  std::string render() const {
    if (series_.empty()) throw PlotError("plot '" + title_ + "' has no data series");
    for (const auto& s : series_)
      if (s.points.empty()) throw PlotError("missing data series '" + s.name + "'");
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series_)
      for (const auto& p : s.points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw PlotError("non-finite value in series '" + s.name + "'");
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
    widen(x0, x1);
    widen(y0, y1);
    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    if (equal_) {
      // Grow the tighter axis so one data unit has the same length on both.
      const double sx = (x1 - x0) / pw, sy = (y1 - y0) / ph;
      if (sx > sy) {
        const double c = 0.5 * (y0 + y1), half = 0.5 * sx * ph;
        y0 = c - half;
        y1 = c + half;
      } else {
        const double c = 0.5 * (x0 + x1), half = 0.5 * sy * pw;
        x0 = c - half;
        x1 = c + half;
      }
    }
    auto X = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto Y = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kW) + "\" height=\"" + px(kH) +
         "\" viewBox=\"0 0 " + px(kW) + " " + px(kH) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + px(kW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" + escape(title_) + "</text>\n";
    o += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" + px(pw) + "\" height=\"" + px(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= kTicks; ++i) {
      const double fx = x0 + (x1 - x0) * i / kTicks, fy = y0 + (y1 - y0) * i / kTicks;
      o += "<line x1=\"" + px(X(fx)) + "\" y1=\"" + px(kTop + ph) + "\" x2=\"" + px(X(fx)) + "\" y2=\"" +
           px(kTop + ph + 5) + "\" stroke=\"black\"/>";
      o += "<text x=\"" + px(X(fx)) + "\" y=\"" + px(kTop + ph + 18) + "\" text-anchor=\"middle\">" + num(fx, 4) +
           "</text>\n";
      o += "<line x1=\"" + px(kLeft - 5) + "\" y1=\"" + px(Y(fy)) + "\" x2=\"" + px(kLeft) + "\" y2=\"" + px(Y(fy)) +
           "\" stroke=\"black\"/>";
      o += "<text x=\"" + px(kLeft - 8) + "\" y=\"" + px(Y(fy) + 4) + "\" text-anchor=\"end\">" + num(fy, 4) +
           "</text>\n";
    }
    o += "<text x=\"" + px(kLeft + pw / 2) + "\" y=\"" + px(kH - 8) + "\" text-anchor=\"middle\">" + escape(xlabel_) +
         "</text>\n";
    o += "<text x=\"16\" y=\"" + px(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         px(kTop + ph / 2) + ")\">" + escape(ylabel_) + "</text>\n";

    for (const auto& s : series_) {
      o += "<g id=\"" + escape(s.name) + "\">\n";
      const auto pts = decimate(s.points, s.style == Style::Line ? 4000 : s.points.size());
      switch (s.style) {
        case Style::Line:
        case Style::Outline: {
          o += s.style == Style::Line ? "<polyline" : "<polygon";
          o += " fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" + px(s.size) + "\" points=\"";
          for (std::size_t i = 0; i < pts.size(); ++i) o += (i ? " " : "") + px(X(pts[i].x)) + "," + px(Y(pts[i].y));
          o += "\"/>\n";
          break;
        }
        case Style::Scatter:
          for (const auto& p : pts)
            o += "<circle cx=\"" + px(X(p.x)) + "\" cy=\"" + px(Y(p.y)) + "\" r=\"" + px(s.size) + "\" fill=\"" + s.color +
                 "\"/>\n";
          break;
        case Style::Marker:
          for (const auto& p : pts) {
            const double cx = X(p.x), cy = Y(p.y), r = s.size;
            o += "<path d=\"M" + px(cx - r) + "," + px(cy - r) + "L" + px(cx + r) + "," + px(cy + r) + "M" + px(cx - r) + "," +
                 px(cy + r) + "L" + px(cx + r) + "," + px(cy - r) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
          }
          break;
      }
      o += "</g>\n";
    }
    // Legend.
    double ly = kTop + 14;
    for (const auto& s : series_) {
      o += "<rect x=\"" + px(kW - kRight - 150) + "\" y=\"" + px(ly - 9) + "\" width=\"10\" height=\"10\" fill=\"" + s.color +
           "\"/><text x=\"" + px(kW - kRight - 135) + "\" y=\"" + px(ly) + "\">" + escape(s.name) + "</text>\n";
      ly += 16;
    }
    o += "</svg>\n";
    return o;
  }

 private:
  static constexpr double kW = 720, kH = 540, kLeft = 80, kRight = 20, kTop = 36, kBottom = 50;
  static constexpr int kTicks = 5;

  static void widen(double& lo, double& hi) {
    const double span = hi - lo;
    const double pad = span > 0.0 ? 0.05 * span : std::max(1e-3, 0.05 * std::abs(lo));
    lo -= pad;
    hi += pad;
  }

  // Keeps every k-th point plus the last one.
  static std::vector<Point2> decimate(const std::vector<Point2>& v, std::size_t max_points) {
    if (v.size() <= max_points) return v;
    const std::size_t k = (v.size() + max_points - 1) / max_points;
    std::vector<Point2> out;
    for (std::size_t i = 0; i < v.size(); i += k) out.push_back(v[i]);
    if (out.back() != v.back()) out.push_back(v.back());
    return out;
  }

  std::string title_, xlabel_, ylabel_;
  std::vector<Series> series_;
  bool equal_ = false;
};

}  // namespace crtbp::svg
