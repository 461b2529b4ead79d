// Poincare sections as lines (or half-lines) in the rotating-frame plane.
#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "crtbp/dynamics.hpp"
#include "crtbp/integrator.hpp"

namespace crtbp {

enum class CrossingDirection { Both, Ascending, Descending };

/// Line through `anchor` at angle `alpha` (radians, measured from +x).
/// "Ascending" crossings move along the line normal (-sin a, cos a), i.e.
/// with yd > 0 for alpha = 0. With `half_line` set only the ray starting at
/// the anchor in direction alpha counts.
struct PoincareSection {
  Point2 anchor{0.0, 0.0};
  double alpha = 0.0;
  CrossingDirection direction = CrossingDirection::Both;
  bool half_line = false;

  void validate() const {
    if (!(alpha >= 0.0 && alpha < 2.0 * std::numbers::pi)) throw std::domain_error("section angle must lie in [0, 2 pi)");
  }

  /// Signed offset of a position from the line; zero on the section.
  double offset(double x, double y) const {
    return (y - anchor.y) * std::cos(alpha) - (x - anchor.x) * std::sin(alpha);
  }
  double offset(const StateVec& s) const { return offset(s.x, s.y); }

  /// Coordinate along the line measured from the anchor.
  double along(double x, double y) const {
    return (x - anchor.x) * std::cos(alpha) + (y - anchor.y) * std::sin(alpha);
  }

  double normal_velocity(const StateVec& s) const { return -s.vx * std::sin(alpha) + s.vy * std::cos(alpha); }

  bool accepts(const StateVec& s) const {
    if (half_line && along(s.x, s.y) < 0.0) return false;
    const double vn = normal_velocity(s);
    switch (direction) {
      case CrossingDirection::Ascending: return vn > 0.0;
      case CrossingDirection::Descending: return vn < 0.0;
      case CrossingDirection::Both: break;
    }
    return true;
  }
};

struct SectionCrossing {
  StateVec state;
  Point2 coords;  // (x, xd)
  double t = 0.0;
  int trajectory_id = 0;
  std::size_t step = 0;  // index of the step bracketing the crossing

  bool ascending(const PoincareSection& sec) const { return sec.normal_velocity(state) > 0.0; }
};

/// Crossing between two consecutive samples, if the offset changes sign.
/// The crossing state is the linear interpolant between the samples.
inline std::optional<SectionCrossing> crossing_between(const StateVec& a, const StateVec& b, double ta, double tb,
                                                       const PoincareSection& sec) {
  const double ga = sec.offset(a);
  const double gb = sec.offset(b);
  const bool crosses = (ga < 0.0 && gb >= 0.0) || (ga > 0.0 && gb <= 0.0);
  if (!crosses) return std::nullopt;
  const double s = ga / (ga - gb);
  const Vec4 v = (1.0 - s) * a.vec() + s * b.vec();
  SectionCrossing c;
  c.state = StateVec::from(v);
  c.t = ta + s * (tb - ta);
  c.coords = {c.state.x, c.state.vx};
  if (!sec.accepts(c.state)) return std::nullopt;
  return c;
}

inline std::vector<SectionCrossing> detect_crossings(const DiscreteTrajectory& traj, const PoincareSection& sec,
                                                     int trajectory_id = 0) {
  std::vector<SectionCrossing> out;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    auto c = crossing_between(traj.states[k], traj.states[k + 1], traj.time(k), traj.time(k + 1), sec);
    if (c) {
      c->trajectory_id = trajectory_id;
      c->step = k;
      out.push_back(*c);
    }
  }
  return out;
}

}  // namespace crtbp
