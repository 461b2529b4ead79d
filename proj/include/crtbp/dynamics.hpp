// Planar circular restricted three-body problem in the rotating frame.
//
// Nondimensional units: distance between primaries = 1, mean motion = 1,
// total mass = 1. The larger primary sits at (-mu, 0), the smaller at
// (1 - mu, 0).
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace crtbp {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Raised when a state lies (numerically) on top of one of the primaries.
class CollisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by iterative solvers that fail to meet their tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kCollisionRadius = 1e-8;

struct SystemParams {
  double mu = 0.0125;
  double h = 1e-3;
  double u_max = 0.0;

  void validate() const {
    if (!(mu >= 0.0 && mu <= 0.5)) throw std::domain_error("mu must lie in [0, 1/2]");
    if (!(h > 0.0) || !std::isfinite(h)) throw std::domain_error("step h must be positive");
    if (!(u_max >= 0.0) || !std::isfinite(u_max)) throw std::domain_error("u_max must be non-negative");
  }
};

struct StateVec {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  Vec4 vec() const { return {x, y, vx, vy}; }
  static StateVec from(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(vx) && std::isfinite(vy);
  }
  friend bool operator==(const StateVec&, const StateVec&) = default;
};

struct ControlVec {
  double ux = 0.0;
  double uy = 0.0;

  Vec2 vec() const { return {ux, uy}; }
  static ControlVec from(const Vec2& v) { return {v[0], v[1]}; }
  double norm() const { return std::hypot(ux, uy); }
  friend bool operator==(const ControlVec&, const ControlVec&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Secondary-to-total mass ratio.
inline double mass_parameter(double m1, double m2) {
  if (!(m1 > 0.0)) throw std::domain_error("primary mass must be positive");
  if (!(m2 >= 0.0)) throw std::domain_error("secondary mass must be non-negative");
  if (m2 > m1) throw std::domain_error("secondary mass exceeds primary mass");
  return m2 / (m1 + m2);
}

inline std::pair<Point2, Point2> primary_positions(const SystemParams& p) {
  return {{-p.mu, 0.0}, {1.0 - p.mu, 0.0}};
}

struct Distances {
  double r1;
  double r2;
};

inline Distances distances(double x, double y, double mu) {
  const double r1 = std::hypot(x + mu, y);
  const double r2 = std::hypot(x - 1.0 + mu, y);
  // A massless primary cannot be collided with.
  if (r1 < kCollisionRadius && mu < 1.0) throw CollisionError("state collides with the larger primary");
  if (r2 < kCollisionRadius && mu > 0.0) throw CollisionError("state collides with the smaller primary");
  return {r1, r2};
}

inline Distances distances(const StateVec& s, const SystemParams& p) {
  return distances(s.x, s.y, p.mu);
}

/// U = (x^2 + y^2)/2 + (1 - mu)/r1 + mu/r2.
inline double effective_potential(double x, double y, double mu) {
  const auto [r1, r2] = distances(x, y, mu);
  double u = 0.5 * (x * x + y * y);
  if (mu < 1.0) u += (1.0 - mu) / r1;
  if (mu > 0.0) u += mu / r2;
  return u;
}

inline double effective_potential(const StateVec& s, const SystemParams& p) {
  return effective_potential(s.x, s.y, p.mu);
}

/// Gravitational attraction terms only, with the sign used by the discrete
/// map: G = ((1-mu)(x+mu)/r1^3 + mu(x-1+mu)/r2^3, (1-mu)y/r1^3 + mu y/r2^3).
/// The full effective-potential gradient is (x, y) - G.
inline Vec2 gravity_terms(double x, double y, double mu) {
  const auto [r1, r2] = distances(x, y, mu);
  const double c1 = mu < 1.0 ? (1.0 - mu) / (r1 * r1 * r1) : 0.0;
  const double c2 = mu > 0.0 ? mu / (r2 * r2 * r2) : 0.0;
  return {c1 * (x + mu) + c2 * (x - 1.0 + mu), (c1 + c2) * y};
}

inline Vec2 grad_U(double x, double y, double mu) {
  return Vec2{x, y} - gravity_terms(x, y, mu);
}

inline Vec2 grad_U(const StateVec& s, const SystemParams& p) { return grad_U(s.x, s.y, p.mu); }

/// Rotating-frame equations of motion:
///   xdd - 2 yd = Ux + ux,   ydd + 2 xd = Uy + uy.
inline Vec4 continuous_dynamics(const Vec4& s, const Vec2& u, double mu) {
  const Vec2 g = grad_U(s[0], s[1], mu);
  return {s[2], s[3], 2.0 * s[3] + g[0] + u[0], -2.0 * s[2] + g[1] + u[1]};
}

inline StateVec continuous_dynamics(const StateVec& s, const ControlVec& u, const SystemParams& p) {
  return StateVec::from(continuous_dynamics(s.vec(), u.vec(), p.mu));
}

/// Jacobi integral E = (xd^2 + yd^2)/2 - U.
inline double jacobi_integral(const Vec4& s, double mu) {
  return 0.5 * (s[2] * s[2] + s[3] * s[3]) - effective_potential(s[0], s[1], mu);
}

inline double jacobi_integral(const StateVec& s, const SystemParams& p) {
  return jacobi_integral(s.vec(), p.mu);
}

struct LagrangePointSet {
  std::array<Point2, 5> points;  // L1..L5

  const Point2& operator[](int i) const { return points.at(static_cast<std::size_t>(i - 1)); }
};

namespace detail {

// Ux(x, 0) on an open interval where it changes sign exactly once.
inline double bisect_collinear(double lo, double hi, double mu) {
  auto fx = [mu](double x) { return grad_U(x, 0.0, mu)[0]; };
  double flo = fx(lo);
  const double fhi = fx(hi);
  if (std::signbit(flo) == std::signbit(fhi)) throw NumericalError("collinear point not bracketed");
  while (hi - lo > 1e-14) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = fx(mid);
    if (fm == 0.0) return mid;
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Five equilibria of the rotating-frame dynamics. The collinear points come
/// from bisection on Ux(x, 0) in the three intervals separated by the
/// primaries.
inline LagrangePointSet lagrange_points(const SystemParams& p) {
  const double mu = p.mu;
  if (!(mu > 0.0 && mu < 0.5)) throw std::domain_error("lagrange_points requires 0 < mu < 1/2");
  // Ux -> -inf just right of a primary and +inf just left of it.
  const double off = 1e-6;
  const double x1 = detail::bisect_collinear(-mu + off, 1.0 - mu - off, mu);
  const double x2 = detail::bisect_collinear(1.0 - mu + off, 2.0, mu);
  const double x3 = detail::bisect_collinear(-2.0, -mu - off, mu);
  const double s3 = std::sqrt(3.0) / 2.0;
  return {{Point2{x1, 0.0}, Point2{x2, 0.0}, Point2{x3, 0.0}, Point2{0.5 - mu, s3},
           Point2{0.5 - mu, -s3}}};
}

/// Earth-Moon style conversion helper: nondimensional time and length scales.
struct UnitSystem {
  double length_km;
  double time_s;

  double to_seconds(double t) const { return t * time_s; }
  double to_km(double l) const { return l * length_km; }
};

}  // namespace crtbp
