// Lyapunov orbits about the collinear points, their monodromy matrices,
// invariant-manifold globalization and the control-free target region.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <tuple>
#include <optional>
#include <string>
#include <vector>

#include "crtbp/dynamics.hpp"
#include "crtbp/integrator.hpp"
#include "crtbp/linearization.hpp"
#include "crtbp/section.hpp"

namespace crtbp {

/// Symmetric planar orbit starting on y = 0 with a perpendicular crossing.
/// The stored trajectory covers one full period with step `step`; the period
/// is an integer number of steps, so `step` is a slightly adjusted copy of
/// the requested h.
struct PeriodicOrbit {
  StateVec initial;
  double period = 0.0;
  double step = 0.0;
  std::size_t half_steps = 0;
  double energy = 0.0;
  int iterations = 0;
  DiscreteTrajectory trajectory;
};

struct OrbitTarget {
  enum class Kind { InitialX, Amplitude, Energy };
  Kind kind = Kind::InitialX;
  double value = 0.0;
  std::optional<double> vy_guess;  // only used with InitialX

  static OrbitTarget initial_x(double x0, std::optional<double> vy = std::nullopt) {
    return {Kind::InitialX, x0, vy};
  }
  static OrbitTarget amplitude(double a) { return {Kind::Amplitude, a, std::nullopt}; }
  static OrbitTarget energy(double e) { return {Kind::Energy, e, std::nullopt}; }
};

struct OrbitCorrectorOptions {
  double tolerance = 1e-12;
  int max_iterations = 30;
  double continuation_step = 2e-3;  // amplitude increment when continuing from L1
  int collinear_point = 1;          // 1 or 2
};

namespace detail {

inline Vec4 propagate_state(Vec4 s, std::size_t n, double h, double mu) {
  for (std::size_t k = 0; k < n; ++k) s = vi_step(s, Vec2::Zero(), h, mu);
  return s;
}

/// Center-mode frequency and yd/x amplitude ratio of the linearized flow at
/// a collinear point.
struct CenterMode {
  double omega;
  double vy_per_dx;  // yd(0) = vy_per_dx * (x0 - xL)
};

inline CenterMode center_mode(double xl, double mu) {
  const auto [r1, r2] = distances(xl, 0.0, mu);
  const double c2 = (1.0 - mu) / (r1 * r1 * r1) + mu / (r2 * r2 * r2);
  const double a = 1.0 + 2.0 * c2;  // Uxx
  const double b = 1.0 - c2;        // Uyy
  const double p = 4.0 - a - b;
  const double lam2 = 0.5 * (-p - std::sqrt(p * p - 4.0 * a * b));
  const double omega = std::sqrt(-lam2);
  return {omega, -0.5 * (omega * omega + a)};
}

struct CorrectedHalf {
  double vy0;
  double h;
  int iterations;
  double residual;
};

// Newton on (yd0, h) so that after n steps y = 0 and xd = 0.
inline CorrectedHalf correct_half_orbit(double x0, double vy0, double h, std::size_t n, double mu,
                                        const OrbitCorrectorOptions& opt) {
  double residual = 0.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Vec4 s0{x0, 0.0, 0.0, vy0};
    Mat4 phi = Mat4::Identity();
    Vec4 s = s0;
    for (std::size_t k = 0; k < n; ++k) {
      phi = vi_jacobian(s, h, mu) * phi;
      s = vi_step(s, Vec2::Zero(), h, mu);
    }
    residual = std::max(std::abs(s[1]), std::abs(s[2]));
    if (!std::isfinite(residual)) break;
    if (residual <= opt.tolerance) return {vy0, h, it, residual};
    const double dh = 1e-7 * h;
    const Vec4 sp = propagate_state(s0, n, h + dh, mu);
    const Vec4 sm = propagate_state(s0, n, h - dh, mu);
    Eigen::Matrix2d jac;
    jac << phi(1, 3), (sp[1] - sm[1]) / (2.0 * dh), phi(2, 3), (sp[2] - sm[2]) / (2.0 * dh);
    const Eigen::Vector2d delta = jac.fullPivLu().solve(Eigen::Vector2d(-s[1], -s[2]));
    vy0 += delta[0];
    h += delta[1];
    if (!(h > 0.0)) break;
  }
  throw NumericalError("periodic orbit corrector diverged, last residual " + std::to_string(residual));
}

inline PeriodicOrbit assemble_orbit(double x0, const CorrectedHalf& c, std::size_t n, double mu) {
  PeriodicOrbit orbit;
  orbit.initial = {x0, 0.0, 0.0, c.vy0};
  orbit.step = c.h;
  orbit.half_steps = n;
  orbit.period = 2.0 * static_cast<double>(n) * c.h;
  orbit.iterations = c.iterations;
  SystemParams p;
  p.mu = mu;
  p.h = c.h;
  orbit.trajectory = propagate(orbit.initial, 2 * n, p);
  orbit.energy = jacobi_integral(orbit.initial, p);
  return orbit;
}

}  // namespace detail

/// Differential correction of a Lyapunov orbit about L1 (or L2) with the
/// discrete map. Without a velocity guess the family is continued from a
/// small-amplitude seed of the linearized center mode.
inline PeriodicOrbit find_periodic_orbit(const SystemParams& params, const OrbitTarget& target,
                                         const OrbitCorrectorOptions& opt = {}) {
  params.validate();
  const double mu = params.mu;
  const LagrangePointSet lp = lagrange_points(params);
  const double xl = opt.collinear_point == 2 ? lp[2].x : lp[1].x;
  const detail::CenterMode mode = detail::center_mode(xl, mu);
  const double side = opt.collinear_point == 2 ? 1.0 : -1.0;  // continue toward the larger primary for L1

  auto seed = [&](double amp) {
    const double x0 = xl + side * amp;
    const double half = std::numbers::pi / mode.omega;
    const auto n = static_cast<std::size_t>(std::max(2.0, std::round(half / params.h)));
    return std::tuple{x0, mode.vy_per_dx * (x0 - xl), half / static_cast<double>(n), n};
  };

  if (target.kind == OrbitTarget::Kind::InitialX && target.vy_guess) {
    // Direct correction from the supplied guess; the half-period comes from
    // the first downward y = 0 crossing of the guess.
    const double x0 = target.value;
    Vec4 s{x0, 0.0, 0.0, *target.vy_guess};
    double t_half = 0.0;
    for (std::size_t k = 1; k < 1000000; ++k) {
      const Vec4 next = vi_step(s, Vec2::Zero(), params.h, mu);
      if (k > 2 && (s[1] > 0.0) != (next[1] > 0.0)) {
        t_half = (static_cast<double>(k - 1) + s[1] / (s[1] - next[1])) * params.h;
        break;
      }
      s = next;
    }
    if (t_half <= 0.0) throw NumericalError("guess never returns to y = 0");
    const auto n = static_cast<std::size_t>(std::max(2.0, std::round(t_half / params.h)));
    const auto c = detail::correct_half_orbit(x0, *target.vy_guess, t_half / static_cast<double>(n), n, mu, opt);
    return detail::assemble_orbit(x0, c, n, mu);
  }

  // Natural-parameter continuation in amplitude.
  double amp = 1e-4;
  auto [x0, vy0, h, n] = seed(amp);
  auto c = detail::correct_half_orbit(x0, vy0, h, n, mu, opt);
  PeriodicOrbit orbit = detail::assemble_orbit(x0, c, n, mu);
  if (target.kind == OrbitTarget::Kind::Amplitude && target.value <= amp) return orbit;

  auto goal_reached = [&](const PeriodicOrbit& o, double a) {
    switch (target.kind) {
      case OrbitTarget::Kind::InitialX: return side * (target.value - xl) <= a;
      case OrbitTarget::Kind::Amplitude: return target.value <= a;
      case OrbitTarget::Kind::Energy: return o.energy >= target.value;
    }
    return true;
  };

  PeriodicOrbit prev = orbit;
  double prev_amp = amp;
  while (true) {
    double next_amp = amp + opt.continuation_step;
    if (target.kind == OrbitTarget::Kind::InitialX) next_amp = std::min(next_amp, side * (target.value - xl));
    if (target.kind == OrbitTarget::Kind::Amplitude) next_amp = std::min(next_amp, target.value);
    const double nx0 = xl + side * next_amp;
    // Linear extrapolation of (yd0, half period) along the family.
    const double t = (next_amp - prev_amp) / std::max(amp - prev_amp, 1e-300);
    // The first member is in the linear regime, where yd0 scales with amplitude.
    double vy_guess = orbit.initial.vy * next_amp / amp;
    double half_guess = 0.5 * orbit.period;
    if (amp > prev_amp) {
      vy_guess = prev.initial.vy + t * (orbit.initial.vy - prev.initial.vy);
      half_guess = 0.5 * (prev.period + t * (orbit.period - prev.period));
    }
    const auto nn = static_cast<std::size_t>(std::max(2.0, std::round(half_guess / params.h)));
    c = detail::correct_half_orbit(nx0, vy_guess, half_guess / static_cast<double>(nn), nn, mu, opt);
    prev = orbit;
    prev_amp = amp;
    orbit = detail::assemble_orbit(nx0, c, nn, mu);
    amp = next_amp;
    if (goal_reached(orbit, amp)) break;
    if (amp > 0.5) throw NumericalError("orbit target outside the continued family range");
  }

  if (target.kind == OrbitTarget::Kind::Energy) {
    // Secant refinement on the amplitude between the bracketing members.
    double a0 = prev_amp, a1 = amp;
    PeriodicOrbit o0 = prev, o1 = orbit;
    for (int it = 0; it < 40 && std::abs(o1.energy - target.value) > 1e-12; ++it) {
      const double a2 = a1 - (o1.energy - target.value) * (a1 - a0) / (o1.energy - o0.energy);
      const double nx0 = xl + side * a2;
      const auto cc = detail::correct_half_orbit(nx0, o1.initial.vy + (o1.initial.vy - o0.initial.vy) * (a2 - a1) / (a1 - a0),
                                                 o1.step, o1.half_steps, mu, opt);
      o0 = o1;
      a0 = a1;
      o1 = detail::assemble_orbit(nx0, cc, o1.half_steps, mu);
      a1 = a2;
    }
    return o1;
  }
  return orbit;
}

struct EigenPair {
  std::complex<double> value;
  Eigen::Vector4cd vector;
};

struct MonodromyResult {
  Mat4 matrix;
  std::vector<EigenPair> eigen;  // sorted by descending modulus
  double unstable_value = 0.0;
  double stable_value = 0.0;
  Vec4 unstable_vector;
  Vec4 stable_vector;

  double determinant() const { return matrix.determinant(); }
};

inline MonodromyResult monodromy(const PeriodicOrbit& orbit) {
  MonodromyResult res;
  res.matrix = stm_chain(orbit.trajectory);
  const Eigen::EigenSolver<Mat4> es(res.matrix);
  for (int i = 0; i < 4; ++i) res.eigen.push_back({es.eigenvalues()[i], es.eigenvectors().col(i)});
  std::sort(res.eigen.begin(), res.eigen.end(),
            [](const EigenPair& a, const EigenPair& b) { return std::abs(a.value) > std::abs(b.value); });
  const EigenPair& top = res.eigen.front();
  const EigenPair& bottom = res.eigen.back();
  const double tol = 1e-8 * std::abs(top.value);
  if (std::abs(top.value.imag()) > tol || top.value.real() <= 1.0)
    throw NumericalError("monodromy matrix has no real unstable eigenvalue");
  res.unstable_value = top.value.real();
  res.stable_value = bottom.value.real();
  // Eigenvectors of real eigenvalues are real up to a complex phase.
  auto realify = [](const Eigen::Vector4cd& v) {
    int idx = 0;
    for (int i = 1; i < 4; ++i)
      if (std::abs(v[i]) > std::abs(v[idx])) idx = i;
    const std::complex<double> phase = std::abs(v[idx]) / v[idx];
    Vec4 r = (v * phase).real();
    r.normalize();
    if (r[0] < 0.0) r = -r;
    return r;
  };
  res.unstable_vector = realify(top.vector);
  res.stable_vector = realify(bottom.vector);
  return res;
}

enum class Stability { Stable, Unstable };
enum class Side { Positive, Negative };

struct ManifoldTrajectory {
  std::size_t departure_index = 0;
  double departure_time = 0.0;
  StateVec seed;
  DiscreteTrajectory trajectory;  // in forward time for unstable, reversed time for stable
  std::optional<SectionCrossing> crossing;
  double time_of_flight = 0.0;  // to the crossing, or the full propagation span
};

struct ManifoldBranch {
  StateVec orbit_initial;
  double orbit_period = 0.0;
  double orbit_energy = 0.0;
  Stability stability = Stability::Unstable;
  Side side = Side::Positive;
  double epsilon = 0.0;
  std::vector<ManifoldTrajectory> trajectories;

  std::vector<SectionCrossing> crossings() const {
    std::vector<SectionCrossing> out;
    for (const auto& t : trajectories)
      if (t.crossing) out.push_back(*t.crossing);
    return out;
  }
  double mean_time_of_flight() const {
    double sum = 0.0;
    int n = 0;
    for (const auto& t : trajectories)
      if (t.crossing) {
        sum += t.time_of_flight;
        ++n;
      }
    return n > 0 ? sum / n : 0.0;
  }
};

struct ManifoldOptions {
  Stability stability = Stability::Unstable;
  Side side = Side::Positive;
  double epsilon = 1e-6;
  std::size_t n_traj = 20;
  std::optional<PoincareSection> stop;
  double t_max = 10.0;
  double min_time = 0.0;  // crossings earlier than this are ignored
  bool keep_trajectories = true;
};

/// Seeds perturbations along the transported monodromy eigenvector at equally
/// spaced orbit points and propagates them until they reach the stop section
/// or t_max. Positive side: along the eigenvector oriented with a
/// nonnegative x component at the orbit's initial point.
inline ManifoldBranch globalize_manifold(const PeriodicOrbit& orbit, const ManifoldOptions& opt) {
  if (!(opt.epsilon > 0.0)) throw std::domain_error("manifold perturbation must be positive");
  if (opt.n_traj < 1) throw std::domain_error("manifold needs at least one trajectory");
  const MonodromyResult mono = monodromy(orbit);
  const SystemParams& p = orbit.trajectory.params;
  const double mu = p.mu;

  ManifoldBranch branch;
  branch.orbit_initial = orbit.initial;
  branch.orbit_period = orbit.period;
  branch.orbit_energy = orbit.energy;
  branch.stability = opt.stability;
  branch.side = opt.side;
  branch.epsilon = opt.epsilon;

  const Vec4 v0 = opt.stability == Stability::Unstable ? mono.unstable_vector : mono.stable_vector;
  const double sign = opt.side == Side::Positive ? 1.0 : -1.0;
  const std::size_t n_orbit = orbit.trajectory.steps();
  const auto n_prop = static_cast<std::size_t>(std::ceil(opt.t_max / orbit.step));

  // Transport the eigenvector along the orbit with the per-step Jacobians.
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < opt.n_traj; ++i) indices.push_back(i * n_orbit / opt.n_traj);
  Mat4 phi = Mat4::Identity();
  std::size_t at = 0;
  for (const std::size_t idx : indices) {
    for (; at < idx; ++at) phi = vi_jacobian(orbit.trajectory.states[at].vec(), orbit.step, mu) * phi;
    Vec4 dir = phi * v0;
    dir.normalize();
    const Vec4 base = orbit.trajectory.states[idx].vec();
    ManifoldTrajectory mt;
    mt.departure_index = idx;
    mt.departure_time = orbit.trajectory.time(idx);
    mt.seed = StateVec::from(base + sign * opt.epsilon * dir);

    // Stable branches run backward in time through the reflection symmetry.
    const bool backward = opt.stability == Stability::Stable;
    SystemParams pp = p;
    pp.h = orbit.step;
    DiscreteTrajectory traj;
    traj.h = orbit.step;
    traj.params = pp;
    traj.states.push_back(mt.seed);
    Vec4 s = backward ? reflect(mt.seed.vec()) : mt.seed.vec();
    for (std::size_t k = 0; k < n_prop; ++k) {
      try {
        s = vi_step(s, Vec2::Zero(), orbit.step, mu);
      } catch (const CollisionError&) {
        break;
      }
      traj.controls.push_back({});
      traj.states.push_back(StateVec::from(backward ? reflect(s) : s));
      if (opt.stop) {
        const auto c = crossing_between(traj.states[k], traj.states[k + 1], traj.time(k), traj.time(k + 1), *opt.stop);
        if (c && c->t >= opt.min_time) {
          mt.crossing = *c;
          mt.crossing->trajectory_id = static_cast<int>(branch.trajectories.size());
          mt.crossing->step = k;
          break;
        }
      }
    }
    mt.time_of_flight = mt.crossing ? mt.crossing->t : traj.duration();
    if (opt.keep_trajectories) mt.trajectory = std::move(traj);
    branch.trajectories.push_back(std::move(mt));
  }
  return branch;
}

struct TargetRegion {
  DiscreteTrajectory trajectory;
  std::vector<SectionCrossing> crossings;
  std::vector<SectionCrossing> ascending;
  std::vector<SectionCrossing> descending;
  double energy = 0.0;
  double max_r2 = 0.0;
  bool escaped = false;
};

/// Control-free propagation of a target-orbit initial condition, recording
/// its section crossings split by crossing direction.
inline TargetRegion target_orbit_region(const SystemParams& params, const StateVec& state0, double t_span,
                                        const PoincareSection& section, double escape_radius = 0.5) {
  params.validate();
  const auto n = static_cast<std::size_t>(std::llround(t_span / params.h));
  TargetRegion region;
  region.trajectory = propagate(state0, n, params);
  region.energy = jacobi_integral(state0, params);
  for (const auto& s : region.trajectory.states)
    region.max_r2 = std::max(region.max_r2, distances(s, params).r2);
  region.escaped = region.max_r2 > escape_radius;
  PoincareSection both = section;
  both.direction = CrossingDirection::Both;
  region.crossings = detect_crossings(region.trajectory, both);
  for (const auto& c : region.crossings) {
    if (!section.accepts(c.state)) continue;
    (c.ascending(section) ? region.ascending : region.descending).push_back(c);
  }
  return region;
}

}  // namespace crtbp
