// Variational integrator for the forced planar CRTBP, built from the
// trapezoidal discrete Lagrangian, plus a fixed-step RK4 baseline.
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crtbp/dynamics.hpp"

namespace crtbp {

/// Continuous Lagrangian in the rotating frame.
inline double lagrangian(const Point2& q, const Point2& v, double mu) {
  const double a = v.x - q.y;
  const double b = v.y + q.x;
  const auto [r1, r2] = distances(q.x, q.y, mu);
  double l = 0.5 * (a * a + b * b);
  if (mu < 1.0) l += (1.0 - mu) / r1;
  if (mu > 0.0) l += mu / r2;
  return l;
}

/// Trapezoidal discrete Lagrangian L_d(q0, q1) ~ integral of L over one step.
inline double discrete_lagrangian(const Point2& q0, const Point2& q1, double h, double mu) {
  if (!(h > 0.0)) throw std::domain_error("discrete_lagrangian requires h > 0");
  const Point2 v{(q1.x - q0.x) / h, (q1.y - q0.y) / h};
  return 0.5 * h * (lagrangian(q0, v, mu) + lagrangian(q1, v, mu));
}

/// One step of the discrete update map x_k -> x_{k+1} with zero-order-hold
/// control. Positions first, then gravity at k+1, then velocities.
inline Vec4 vi_step(const Vec4& s, const Vec2& u, double h, double mu) {
  const double x = s[0], y = s[1], vx = s[2], vy = s[3];
  const double h2 = h * h;
  const double h3 = h2 * h;
  const Vec2 g0 = gravity_terms(x, y, mu);

  const double inv = 1.0 / (1.0 + h2);
  const double x1 =
      inv * (h * vx + h2 * vy + x * (1.0 + 1.5 * h2) + 0.5 * h3 * y - 0.5 * h3 * g0[1] - 0.5 * h2 * g0[0]);
  const double y1 = h * vy + h * x - h * x1 + y + 0.5 * h2 * y - 0.5 * h2 * g0[1];

  const Vec2 g1 = gravity_terms(x1, y1, mu);
  const double vx1 = vx - 2.0 * y + 2.0 * y1 + 0.5 * h * (x1 + x) - 0.5 * h * g1[0] - 0.5 * h * g0[0] + h * u[0];
  const double vy1 = vy + 2.0 * x - 2.0 * x1 + 0.5 * h * (y1 + y) - 0.5 * h * g1[1] - 0.5 * h * g0[1] + h * u[1];
  return {x1, y1, vx1, vy1};
}

inline StateVec step(const StateVec& s, const ControlVec& u, const SystemParams& p) {
  return StateVec::from(vi_step(s.vec(), u.vec(), p.h, p.mu));
}

/// Time-reversal reflection (x, y, xd, yd) -> (x, -y, -xd, yd). Maps forward
/// solutions onto backward ones.
inline Vec4 reflect(const Vec4& s) { return {s[0], -s[1], -s[2], s[3]}; }
inline StateVec reflect(const StateVec& s) { return {s.x, -s.y, -s.vx, s.vy}; }

struct DiscreteTrajectory {
  std::vector<StateVec> states;
  std::vector<ControlVec> controls;
  double h = 0.0;
  SystemParams params;

  std::size_t steps() const { return controls.size(); }
  double time(std::size_t k) const { return static_cast<double>(k) * h; }
  double duration() const { return time(steps()); }
  const StateVec& back() const { return states.back(); }
};

/// Propagates N steps. `controls` is either empty (control-free) or holds
/// one control per step.
inline DiscreteTrajectory propagate(const StateVec& x0, std::span<const ControlVec> controls, std::size_t n,
                                    const SystemParams& p) {
  if (n < 1) throw std::domain_error("propagate requires N >= 1");
  if (!controls.empty() && controls.size() != n)
    throw std::invalid_argument("control schedule length must equal N");
  DiscreteTrajectory traj;
  traj.h = p.h;
  traj.params = p;
  traj.states.reserve(n + 1);
  traj.controls.reserve(n);
  traj.states.push_back(x0);
  Vec4 s = x0.vec();
  for (std::size_t k = 0; k < n; ++k) {
    const ControlVec u = controls.empty() ? ControlVec{} : controls[k];
    try {
      s = vi_step(s, u.vec(), p.h, p.mu);
    } catch (const CollisionError& e) {
      throw CollisionError(std::string(e.what()) + " at step " + std::to_string(k));
    }
    traj.controls.push_back(u);
    traj.states.push_back(StateVec::from(s));
  }
  return traj;
}

inline DiscreteTrajectory propagate(const StateVec& x0, std::size_t n, const SystemParams& p) {
  return propagate(x0, std::span<const ControlVec>{}, n, p);
}

/// Classical fourth-order Runge-Kutta step of the continuous dynamics.
inline Vec4 rk4_step(const Vec4& s, const Vec2& u, double mu, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("rk4_step requires dt > 0");
  const Vec4 k1 = continuous_dynamics(s, u, mu);
  const Vec4 k2 = continuous_dynamics(s + 0.5 * dt * k1, u, mu);
  const Vec4 k3 = continuous_dynamics(s + 0.5 * dt * k2, u, mu);
  const Vec4 k4 = continuous_dynamics(s + dt * k3, u, mu);
  return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline StateVec rk4_step(const StateVec& s, const ControlVec& u, const SystemParams& p, double dt) {
  return StateVec::from(rk4_step(s.vec(), u.vec(), p.mu, dt));
}

/// Fixed-step RK4 trajectory with the same layout as the variational one.
inline DiscreteTrajectory propagate_rk4(const StateVec& x0, std::size_t n, const SystemParams& p) {
  DiscreteTrajectory traj;
  traj.h = p.h;
  traj.params = p;
  traj.states.reserve(n + 1);
  traj.states.push_back(x0);
  Vec4 s = x0.vec();
  for (std::size_t k = 0; k < n; ++k) {
    s = rk4_step(s, Vec2::Zero(), p.mu, p.h);
    traj.controls.push_back({});
    traj.states.push_back(StateVec::from(s));
  }
  return traj;
}

struct EnergyReport {
  std::vector<double> jacobi;
  double mean_deviation = 0.0;      // mean of E_k - E_0
  double mean_abs_deviation = 0.0;  // mean of |E_k - E_0|
  double max_deviation = 0.0;       // max |E_k - E_0|
  double final_deviation = 0.0;     // E_N - E_0
  double drift_slope = 0.0;         // least-squares dE/dt
};

inline EnergyReport energy_report(const DiscreteTrajectory& traj) {
  if (traj.states.empty()) throw std::invalid_argument("energy_report requires a nonempty trajectory");
  EnergyReport rep;
  const std::size_t n = traj.states.size();
  rep.jacobi.reserve(n);
  for (const auto& s : traj.states) rep.jacobi.push_back(jacobi_integral(s, traj.params));
  const double e0 = rep.jacobi.front();
  double st = 0.0, sd = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = rep.jacobi[k] - e0;
    rep.mean_deviation += d;
    rep.mean_abs_deviation += std::abs(d);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(d));
    st += traj.time(k);
    sd += d;
  }
  rep.mean_deviation /= static_cast<double>(n);
  rep.mean_abs_deviation /= static_cast<double>(n);
  rep.final_deviation = rep.jacobi.back() - e0;
  if (n > 1) {
    const double tm = st / static_cast<double>(n);
    const double dm = sd / static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double dt = traj.time(k) - tm;
      num += dt * (rep.jacobi[k] - e0 - dm);
      den += dt * dt;
    }
    rep.drift_slope = den > 0.0 ? num / den : 0.0;
  }
  return rep;
}

}  // namespace crtbp
