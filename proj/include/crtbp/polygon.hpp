// Small planar polygon toolkit for section-plane sets (x, xd).
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "crtbp/dynamics.hpp"

namespace crtbp::geom {

using Polygon = std::vector<Point2>;

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
inline double signed_area(const Polygon& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& u = p[i];
    const Point2& v = p[(i + 1) % p.size()];
    a += u.x * v.y - v.x * u.y;
  }
  return 0.5 * a;
}

inline double area(const Polygon& p) { return std::abs(signed_area(p)); }

struct SegmentHit {
  Point2 point;
  double s;  // parameter along the first segment
  double t;  // parameter along the second segment
};

/// Proper or touching intersection of segments ab and cd. Parallel segments
/// never report a hit.
inline std::optional<SegmentHit> segment_intersection(const Point2& a, const Point2& b, const Point2& c,
                                                      const Point2& d) {
  const double rx = b.x - a.x, ry = b.y - a.y;
  const double qx = d.x - c.x, qy = d.y - c.y;
  const double den = rx * qy - ry * qx;
  if (den == 0.0) return std::nullopt;
  const double s = ((c.x - a.x) * qy - (c.y - a.y) * qx) / den;
  const double t = ((c.x - a.x) * ry - (c.y - a.y) * rx) / den;
  if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0) return std::nullopt;
  return SegmentHit{{a.x + s * rx, a.y + s * ry}, s, t};
}

/// True when no two non-adjacent edges meet (O(n^2), fine for sweep sizes).
inline bool is_simple(const Polygon& p) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segment_intersection(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
    }
  }
  return std::abs(signed_area(p)) > 0.0;
}

/// Even-odd crossing test. Points on the boundary are not reported inside.
inline bool contains(const Polygon& p, const Point2& q) {
  bool in = false;
  for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) {
    const Point2& a = p[i];
    const Point2& b = p[j];
    if ((a.y > q.y) != (b.y > q.y)) {
      const double xi = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (q.x < xi) in = !in;
    }
  }
  return in;
}

inline double distance_to_segment(const Point2& q, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double l2 = dx * dx + dy * dy;
  double t = l2 > 0.0 ? ((q.x - a.x) * dx + (q.y - a.y) * dy) / l2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(q.x - a.x - t * dx, q.y - a.y - t * dy);
}

inline double boundary_distance(const Polygon& p, const Point2& q) {
  double d = INFINITY;
  for (std::size_t i = 0; i < p.size(); ++i) d = std::min(d, distance_to_segment(q, p[i], p[(i + 1) % p.size()]));
  return d;
}

/// Strictly inside: contained and off the boundary by more than `margin`.
inline bool strictly_contains(const Polygon& p, const Point2& q, double margin = 0.0) {
  return contains(p, q) && boundary_distance(p, q) > margin;
}

inline Point2 vertex_centroid(const Polygon& p) {
  Point2 c{0.0, 0.0};
  for (const auto& v : p) {
    c.x += v.x;
    c.y += v.y;
  }
  c.x /= static_cast<double>(p.size());
  c.y /= static_cast<double>(p.size());
  return c;
}

/// Orders a point cloud by polar angle about its vertex centroid. Adequate
/// for the star-shaped crossing rings met on sections.
inline Polygon order_by_angle(std::vector<Point2> pts) {
  if (pts.empty()) return pts;
  const Point2 c = vertex_centroid(pts);
  std::sort(pts.begin(), pts.end(), [&](const Point2& a, const Point2& b) {
    return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
  });
  return pts;
}

struct EllipseFit {
  Point2 center;
  double major = 0.0;  // semi-axis lengths from the equivalent uniform ellipse
  double minor = 0.0;
  double angle = 0.0;  // major-axis orientation in [0, pi)
};

/// Equivalent ellipse from the area moments of the polygon (uniform lamina).
inline EllipseFit fit_ellipse(const Polygon& p) {
  const double a = signed_area(p);
  if (a == 0.0) throw std::domain_error("cannot fit an ellipse to a degenerate polygon");
  double cx = 0.0, cy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Point2& u = p[i];
    const Point2& v = p[(i + 1) % p.size()];
    const double w = u.x * v.y - v.x * u.y;
    cx += (u.x + v.x) * w;
    cy += (u.y + v.y) * w;
    sxx += (u.x * u.x + u.x * v.x + v.x * v.x) * w;
    syy += (u.y * u.y + u.y * v.y + v.y * v.y) * w;
    sxy += (u.x * v.y + 2.0 * u.x * u.y + 2.0 * v.x * v.y + v.x * u.y) * w;
  }
  cx /= 6.0 * a;
  cy /= 6.0 * a;
  // Central second moments per unit area.
  const double ixx = sxx / (12.0 * a) - cx * cx;
  const double iyy = syy / (12.0 * a) - cy * cy;
  const double ixy = sxy / (24.0 * a) - cx * cy;
  const double tr = 0.5 * (ixx + iyy);
  const double disc = std::sqrt(0.25 * (ixx - iyy) * (ixx - iyy) + ixy * ixy);
  EllipseFit e;
  e.center = {cx, cy};
  e.major = 2.0 * std::sqrt(std::max(0.0, tr + disc));
  e.minor = 2.0 * std::sqrt(std::max(0.0, tr - disc));
  double ang = 0.5 * std::atan2(2.0 * ixy, ixx - iyy);
  if (ang < 0.0) ang += std::numbers::pi;
  e.angle = ang;
  return e;
}

}  // namespace crtbp::geom
