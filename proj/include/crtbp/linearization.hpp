// Analytic Jacobian of the discrete update map and the explicit costate map.
//
// Every entry follows from the exact chain rule through the update map. The
// printed closed forms this was checked against carry a few transcription
// slips, corrected here:
//  * the mixed partial Gxy has r^5 in both terms (one was printed as r1^3);
//  * the k+1 gravity partials enter f3/f4 through both f1 and f2, and the
//    velocity columns need them as well (dGx(k+1)/dxd = Gxx f1_xd + Gxy f2_xd);
//  * the last elimination right-hand side uses lambda_yd, not lambda_xd, and
//    the back-substitution for lambda_y uses alpha_23.
#pragma once

#include <cmath>
#include <vector>

#include "crtbp/dynamics.hpp"
#include "crtbp/integrator.hpp"

namespace crtbp {

/// Distinct second partials of the gravity terms G of the discrete map.
struct GravityHessian {
  double xx;
  double yy;
  double xy;
};

inline GravityHessian second_partials_U(double x, double y, double mu) {
  const auto [r1, r2] = distances(x, y, mu);
  const double dx1 = x + mu, dx2 = x - 1.0 + mu;
  GravityHessian hs{0.0, 0.0, 0.0};
  if (mu < 1.0) {
    const double r3 = r1 * r1 * r1, r5 = r3 * r1 * r1;
    hs.xx += (1.0 - mu) * (1.0 / r3 - 3.0 * dx1 * dx1 / r5);
    hs.yy += (1.0 - mu) * (1.0 / r3 - 3.0 * y * y / r5);
    hs.xy += -3.0 * (1.0 - mu) * dx1 * y / r5;
  }
  if (mu > 0.0) {
    const double r3 = r2 * r2 * r2, r5 = r3 * r2 * r2;
    hs.xx += mu * (1.0 / r3 - 3.0 * dx2 * dx2 / r5);
    hs.yy += mu * (1.0 / r3 - 3.0 * y * y / r5);
    hs.xy += -3.0 * mu * dx2 * y / r5;
  }
  return hs;
}

inline GravityHessian second_partials_U(const StateVec& s, const SystemParams& p) {
  return second_partials_U(s.x, s.y, p.mu);
}

/// d(step)/d(state_k) at fixed control. Row i is the mapped component
/// (x, y, xd, yd)_{k+1}, column j the state component at k.
inline Mat4 vi_jacobian(const Vec4& s, double h, double mu) {
  const double h2 = h * h, h3 = h2 * h;
  const double inv = 1.0 / (1.0 + h2);
  const GravityHessian g0 = second_partials_U(s[0], s[1], mu);

  // Position rows depend on the state at k only.
  Eigen::RowVector4d f1, f2;
  f1 << inv * (1.0 + 1.5 * h2 - 0.5 * h3 * g0.xy - 0.5 * h2 * g0.xx),
      inv * (0.5 * h3 - 0.5 * h3 * g0.yy - 0.5 * h2 * g0.xy), inv * h, inv * h2;
  f2 << h - h * f1[0] - 0.5 * h2 * g0.xy, 1.0 + 0.5 * h2 - h * f1[1] - 0.5 * h2 * g0.yy, -h * f1[2],
      h - h * f1[3];

  const Vec4 next = vi_step(s, Vec2::Zero(), h, mu);
  const GravityHessian g1 = second_partials_U(next[0], next[1], mu);
  const Eigen::RowVector4d dgx1 = g1.xx * f1 + g1.xy * f2;
  const Eigen::RowVector4d dgy1 = g1.xy * f1 + g1.yy * f2;
  const Eigen::RowVector4d ex(1, 0, 0, 0), ey(0, 1, 0, 0), exd(0, 0, 1, 0), eyd(0, 0, 0, 1);
  const Eigen::RowVector4d dgx0 = g0.xx * ex + g0.xy * ey;
  const Eigen::RowVector4d dgy0 = g0.xy * ex + g0.yy * ey;

  const Eigen::RowVector4d f3 = exd - 2.0 * ey + 2.0 * f2 + 0.5 * h * (f1 + ex) - 0.5 * h * dgx1 - 0.5 * h * dgx0;
  const Eigen::RowVector4d f4 = eyd + 2.0 * ex - 2.0 * f1 + 0.5 * h * (f2 + ey) - 0.5 * h * dgy1 - 0.5 * h * dgy0;

  Mat4 j;
  j.row(0) = f1;
  j.row(1) = f2;
  j.row(2) = f3;
  j.row(3) = f4;
  return j;
}

struct StepJacobian {
  Mat4 m;

  double operator()(int i, int j) const { return m(i, j); }
};

inline StepJacobian step_jacobian(const StateVec& s, const SystemParams& p) {
  return {vi_jacobian(s.vec(), p.h, p.mu)};
}

/// d(step)/d(u): the control only enters the velocity rows, scaled by h.
inline Eigen::Matrix<double, 4, 2> control_jacobian(double h) {
  Eigen::Matrix<double, 4, 2> b = Eigen::Matrix<double, 4, 2>::Zero();
  b(2, 0) = h;
  b(3, 1) = h;
  return b;
}

struct CostateVec {
  double lx = 0.0;
  double ly = 0.0;
  double lvx = 0.0;
  double lvy = 0.0;

  Vec4 vec() const { return {lx, ly, lvx, lvy}; }
  static CostateVec from(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }
};

class EliminationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Solves J^T lambda_{k+1} = lambda_k by the fixed-order Gauss-Jordan
/// elimination of the transposed Jacobian (no pivoting, no inverse).
inline Vec4 costate_step_elimination(const Vec4& lam, const Mat4& j) {
  // Notation: fiJ = d f_i / d J, where f1..f4 are the mapped x, y, xd, yd.
  const double f1x = j(0, 0), f1y = j(0, 1), f1xd = j(0, 2), f1yd = j(0, 3);
  const double f2x = j(1, 0), f2y = j(1, 1), f2xd = j(1, 2), f2yd = j(1, 3);
  const double f3x = j(2, 0), f3y = j(2, 1), f3xd = j(2, 2), f3yd = j(2, 3);
  const double f4x = j(3, 0), f4y = j(3, 1), f4xd = j(3, 2), f4yd = j(3, 3);
  auto guard = [](double pivot, const char* name) {
    if (pivot == 0.0 || !std::isfinite(pivot)) throw EliminationError(std::string("vanishing pivot ") + name);
  };

  guard(f1x, "f1x");
  const double a = -f1y / f1x;
  const double b = -f1xd / f1x;
  const double c = -f1yd / f1x;

  const double a22 = f2y + a * f2x;
  const double a23 = f3y + a * f3x;
  const double a24 = f4y + a * f4x;
  guard(a22, "alpha22");
  const double e = -(f2xd + b * f2x) / a22;
  const double f = -(f2yd + c * f2x) / a22;

  const double a33 = f3xd + b * f3x + e * a23;
  const double a34 = f4xd + b * f4x + e * a24;
  guard(a33, "alpha33");
  const double g = -(f3yd + c * f3x + f * a23) / a33;
  const double a44 = f4yd + c * f4x + f * a24 + g * a34;
  guard(a44, "alpha44");

  const double b1 = lam[0];
  const double b2 = lam[1] + a * lam[0];
  const double b3 = lam[2] + b * lam[0] + e * b2;
  const double b4 = lam[3] + c * lam[0] + f * b2 + g * b3;

  const double lyd = b4 / a44;
  const double lxd = (b3 - a34 * lyd) / a33;
  const double ly = (b2 - a23 * lxd - a24 * lyd) / a22;
  const double lx = (b1 - f2x * ly - f3x * lxd - f4x * lyd) / f1x;
  return {lx, ly, lxd, lyd};
}

/// Same system solved with partial-pivot LU.
inline Vec4 costate_step_generic(const Vec4& lam, const Mat4& j) {
  const Eigen::PartialPivLU<Mat4> lu(j.transpose());
  return lu.solve(lam);
}

/// lambda_{k+1}^T = lambda_k^T J^{-1}. Falls back to the pivoted solve when
/// the fixed elimination order hits a zero pivot.
inline Vec4 costate_step(const Vec4& lam, const Mat4& j) {
  try {
    return costate_step_elimination(lam, j);
  } catch (const EliminationError&) {
    return costate_step_generic(lam, j);
  }
}

inline CostateVec costate_step(const CostateVec& lam, const StepJacobian& j) {
  return CostateVec::from(costate_step(lam.vec(), j.m));
}

/// Ordered product J_{N-1} ... J_0 of per-step Jacobians along a trajectory.
inline Mat4 stm_chain(const DiscreteTrajectory& traj) {
  Mat4 phi = Mat4::Identity();
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    phi = vi_jacobian(traj.states[k].vec(), traj.h, traj.params.mu) * phi;
  }
  if (!std::isfinite(phi.determinant()) || phi.determinant() == 0.0)
    throw NumericalError("singular state transition matrix");
  return phi;
}

}  // namespace crtbp
