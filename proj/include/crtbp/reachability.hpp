// Fixed-horizon reachability on a Poincare section by indirect optimal
// control with the discrete map as the dynamics, and the constrained
// transfer solve that closes the design loop.
//
// Costates run forward with the map, lambda_{k+1} = J_k^{-T} lambda_k, so a
// single forward pass yields states, costates and controls together. The
// control at step k is taken from lambda_{k+1}.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "crtbp/dynamics.hpp"
#include "crtbp/integrator.hpp"
#include "crtbp/linearization.hpp"
#include "crtbp/polygon.hpp"
#include "crtbp/section.hpp"
#include "crtbp/structures.hpp"

namespace crtbp {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

struct ReachProblem {
  SystemParams params;  // params.h is the step actually used (see make_reach_problem)
  StateVec x0;
  std::size_t N = 0;
  PoincareSection section;
  DiscreteTrajectory reference;  // control-free propagation of x0

  const StateVec& reference_terminal() const { return reference.back(); }
  double horizon() const { return static_cast<double>(N) * params.h; }
};

/// Builds the problem for a section through L1 at angle alpha. With `snap`
/// the horizon is moved to the control-free section crossing nearest to tf
/// (within snap_window * tf) and h is adjusted so that the reference terminal
/// state lies on the section; otherwise the zero-thrust problem would have
/// no solution.
inline ReachProblem make_reach_problem(const SystemParams& params, const StateVec& x0, double tf, double alpha,
                                       bool snap = true, double snap_window = 0.1) {
  params.validate();
  if (!(tf > 0.0)) throw std::domain_error("reach horizon must be positive");
  if (!x0.finite()) throw std::domain_error("initial state must be finite");
  ReachProblem pb;
  pb.params = params;
  pb.x0 = x0;
  pb.section.anchor = lagrange_points(params)[1];
  pb.section.alpha = alpha;
  pb.section.validate();

  double t_end = tf;
  if (snap) {
    const auto n_probe = static_cast<std::size_t>(std::ceil(tf * (1.0 + snap_window) / params.h)) + 1;
    const auto probe = propagate(x0, n_probe, params);
    const auto hits = detect_crossings(probe, pb.section);
    std::optional<double> best;
    for (const auto& c : hits)
      if (c.t > 0.0 && (!best || std::abs(c.t - tf) < std::abs(*best - tf))) best = c.t;
    if (!best || std::abs(*best - tf) > snap_window * tf)
      throw NumericalError("no control-free section crossing near the requested horizon");
    t_end = *best;
  }
  pb.N = static_cast<std::size_t>(std::max<long long>(2, std::llround(t_end / params.h)));
  pb.params.h = t_end / static_cast<double>(pb.N);
  if (snap) {
    // Secant refinement of h so that the reference terminal offset vanishes.
    auto g = [&](double h) {
      SystemParams q = pb.params;
      q.h = h;
      Vec4 s = x0.vec();
      for (std::size_t k = 0; k < pb.N; ++k) s = vi_step(s, Vec2::Zero(), h, q.mu);
      return pb.section.offset(s[0], s[1]);
    };
    double h0 = pb.params.h, h1 = h0 * (1.0 + 1e-7);
    double g0 = g(h0), g1 = g(h1);
    for (int it = 0; it < 30 && g1 != 0.0 && std::abs(g1) > 1e-15; ++it) {
      if (g1 == g0) break;
      const double h2 = h1 - g1 * (h1 - h0) / (g1 - g0);
      h0 = h1;
      g0 = g1;
      h1 = h2;
      g1 = g(h1);
    }
    pb.params.h = h1;
  }
  pb.reference = propagate(x0, pb.N, pb.params);
  return pb;
}

/// J = -1/2 [(dx)^2 + (dxd)^2]: only the section-plane coordinates count.
inline double cost_J(const Vec4& xN, const Vec4& xnN) {
  const Vec4 d = xN - xnN;
  return -0.5 * (d[0] * d[0] + d[2] * d[2]);
}

/// (m1, m2) in cleared-denominator form: m1 puts the terminal point on the
/// section line, m2 puts (dx, dxd) on the line at angle theta.
inline Vec2 terminal_constraints(const Vec4& xN, const Vec4& xnN, const PoincareSection& sec, double theta) {
  const Vec4 d = xN - xnN;
  return {sec.offset(xN[0], xN[1]), d[2] * std::cos(theta) - d[0] * std::sin(theta)};
}

/// Projection of the terminal displacement on the theta ray; the wanted
/// solution has it positive (the cleared m2 also admits theta + pi).
inline double ray_projection(const Vec4& xN, const Vec4& xnN, double theta) {
  const Vec4 d = xN - xnN;
  return d[0] * std::cos(theta) + d[2] * std::sin(theta);
}

inline Eigen::Matrix<double, 2, 4> terminal_constraint_gradient(const PoincareSection& sec, double theta) {
  Eigen::Matrix<double, 2, 4> g;
  g << -std::sin(sec.alpha), std::cos(sec.alpha), 0.0, 0.0, -std::sin(theta), 0.0, std::cos(theta), 0.0;
  return g;
}

/// Transversality right-hand side d(phi)/dx + (dm/dx)^T beta.
inline Vec4 terminal_costate(const Vec4& xN, const Vec4& xnN, const PoincareSection& sec, double theta,
                             const Vec2& beta) {
  const Vec4 d = xN - xnN;
  return Vec4(-d[0], 0.0, -d[2], 0.0) + terminal_constraint_gradient(sec, theta).transpose() * beta;
}

/// H_k = lambda^T f(x_k, u_k) with the discrete map as f.
inline double hamiltonian(const CostateVec& lam, const StateVec& s, const ControlVec& u, const SystemParams& p) {
  return lam.vec().dot(vi_step(s.vec(), u.vec(), p.h, p.mu));
}

enum class ControlLaw {
  Bound,            // H linear in u: minimum over the disk sits on its rim
  SaturatedEffort,  // quadratic effort added to H: u = -lambda_v, clipped to the disk
};

inline Vec2 control_from_costate(const Vec4& lam_next, double u_max, ControlLaw law) {
  const Vec2 lv(lam_next[2], lam_next[3]);
  const double n = lv.norm();
  if (n == 0.0 || u_max == 0.0) return Vec2::Zero();
  if (law == ControlLaw::Bound || n >= u_max) return -u_max * lv / n;
  return -lv;
}

inline ControlVec optimal_control_from_costate(const CostateVec& lam_next, const SystemParams& p) {
  return ControlVec::from(control_from_costate(lam_next.vec(), p.u_max, ControlLaw::Bound));
}

struct ShootingOptions {
  int n_arcs = 4;
  double tolerance = 1e-8;   // residual norm that counts as converged
  double polish = 1e-11;     // Newton keeps going down to this while it makes progress
  int max_iterations = 30;
  int max_halvings = 30;
  double fd_step = 1e-7;
  ControlLaw law = ControlLaw::Bound;
};

struct ShootingSolution {
  DiscreteTrajectory trajectory;
  std::vector<CostateVec> costates;  // lambda_0 .. lambda_N
  Vec2 beta = Vec2::Zero();
  double theta = 0.0;
  double residual = 0.0;             // Newton residual norm
  double defect = 0.0;               // largest junction continuity defect
  double terminal_residual = 0.0;    // |m| (section mode) or |x_N - x_t| (fixed state)
  double transversality = 0.0;       // section mode only
  int iterations = 0;
  SectionCrossing terminal;
  VecX iterate;                      // Newton unknowns, for warm starts
  ControlLaw law = ControlLaw::Bound;

  Point2 section_point() const { return terminal.coords; }
};

class ShootingError : public NumericalError {
 public:
  ShootingError(const std::string& what, double best_residual, VecX best_iterate)
      : NumericalError(what + " (best residual " + std::to_string(best_residual) + ")"),
        best_residual_(best_residual),
        best_iterate_(std::move(best_iterate)) {}
  double best_residual() const { return best_residual_; }
  const VecX& best_iterate() const { return best_iterate_; }

 private:
  double best_residual_;
  VecX best_iterate_;
};

/// Initial costate and multipliers of a single-arc guess.
struct CostateGuess {
  Vec4 lambda0 = Vec4::Zero();
  Vec2 beta = Vec2::Zero();
};

enum class TerminalMode { Section, FixedState };

/// Multiple-shooting Newton solver for the necessary conditions. Unknowns:
/// lambda_0, then (x, lambda) at each interior junction, then beta (section
/// mode). Residual: junction defects, then (m1, m2, transversality) or the
/// terminal state error.
class MultipleShooting {
 public:
  MultipleShooting(const ReachProblem& pb, TerminalMode mode, double theta, const Vec4& target,
                   const ShootingOptions& opt)
      : pb_(pb), mode_(mode), theta_(theta), target_(target), opt_(opt) {
    if (opt.n_arcs < 1) throw std::domain_error("n_arcs must be at least 1");
    if (static_cast<std::size_t>(opt.n_arcs) > pb.N) throw std::domain_error("more arcs than steps");
    for (int i = 0; i <= opt.n_arcs; ++i) bounds_.push_back(static_cast<std::size_t>(i) * pb.N / opt.n_arcs);
  }

  int arcs() const { return opt_.n_arcs; }
  Eigen::Index size() const { return 4 + 8 * (arcs() - 1) + (mode_ == TerminalMode::Section ? 2 : 0); }

  struct ArcRecord {
    std::vector<Vec4> states, costates;
    std::vector<Vec2> controls;
  };

  /// Runs steps [k0, k1) from (s, lambda); returns the end (state, costate).
  Eigen::Matrix<double, 8, 1> arc(Vec4 s, Vec4 lam, std::size_t k0, std::size_t k1, ArcRecord* rec = nullptr) const {
    const double h = pb_.params.h, mu = pb_.params.mu, umax = pb_.params.u_max;
    if (rec) {
      rec->states.push_back(s);
      rec->costates.push_back(lam);
    }
    for (std::size_t k = k0; k < k1; ++k) {
      lam = costate_step(lam, vi_jacobian(s, h, mu));
      const Vec2 u = control_from_costate(lam, umax, opt_.law);
      s = vi_step(s, u, h, mu);
      if (rec) {
        rec->controls.push_back(u);
        rec->states.push_back(s);
        rec->costates.push_back(lam);
      }
    }
    Eigen::Matrix<double, 8, 1> out;
    out << s, lam;
    return out;
  }

  /// Expands a single-arc guess into a full iterate by one forward pass.
  VecX expand(const CostateGuess& g) const {
    VecX z(size());
    z.head<4>() = g.lambda0;
    Vec4 s = pb_.x0.vec(), lam = g.lambda0;
    for (int i = 1; i < arcs(); ++i) {
      const auto e = arc(s, lam, bounds_[i - 1], bounds_[i]);
      s = e.head<4>();
      lam = e.tail<4>();
      z.segment<4>(4 + 8 * (i - 1)) = s;
      z.segment<4>(8 + 8 * (i - 1)) = lam;
    }
    if (mode_ == TerminalMode::Section) z.tail<2>() = g.beta;
    return z;
  }

  VecX residual(const VecX& z) const {
    VecX r(size());
    const int n = arcs();
    Eigen::Matrix<double, 8, 1> end = Eigen::Matrix<double, 8, 1>::Zero();
    for (int i = 0; i < n; ++i) {
      end = arc(arc_state(z, i), arc_costate(z, i), bounds_[i], bounds_[i + 1]);
      if (i + 1 < n) r.segment<8>(8 * i) = end - z.segment<8>(4 + 8 * i);
    }
    r.tail(terminal_rows()) = terminal_residual(z, end);
    return r;
  }

  /// Finite-difference Jacobian, one arc at a time; the terminal rows are
  /// linear in the last arc's end point, so their chain rule is exact.
  MatX jacobian(const VecX& z) const {
    const int n = arcs();
    MatX jm = MatX::Zero(size(), size());
    for (int i = 0; i < n; ++i) {
      const int width = i == 0 ? 4 : 8;
      const Eigen::Index col0 = i == 0 ? 0 : 4 + 8 * (i - 1);
      Eigen::Matrix<double, 8, Eigen::Dynamic> d(8, width);
      for (int j = 0; j < width; ++j) {
        VecX zp = z, zm = z;
        const double step = opt_.fd_step * std::max(1.0, std::abs(z[col0 + j]));
        zp[col0 + j] += step;
        zm[col0 + j] -= step;
        d.col(j) = (arc(arc_state(zp, i), arc_costate(zp, i), bounds_[i], bounds_[i + 1]) -
                    arc(arc_state(zm, i), arc_costate(zm, i), bounds_[i], bounds_[i + 1])) /
                   (2.0 * step);
      }
      if (i + 1 < n) {
        jm.block(8 * i, col0, 8, width) = d;
        jm.block(8 * i, 4 + 8 * i, 8, 8) -= Eigen::Matrix<double, 8, 8>::Identity();
      } else {
        const Eigen::Index r0 = 8 * (n - 1);
        jm.block(r0, col0, terminal_rows(), width) = terminal_end_gradient() * d;
        if (mode_ == TerminalMode::Section)
          jm.block(r0 + 2, size() - 2, 4, 2) = -terminal_constraint_gradient(pb_.section, theta_).transpose();
      }
    }
    return jm;
  }

  ShootingSolution solve(VecX z) const {
    if (z.size() != size()) throw std::invalid_argument("shooting iterate has the wrong size");
    if (!z.allFinite()) throw std::domain_error("shooting guess must be finite");
    auto safe_norm = [&](const VecX& v, VecX* out) {
      try {
        VecX r = residual(v);
        const double n = r.norm();
        if (out) *out = std::move(r);
        return std::isfinite(n) ? n : std::numeric_limits<double>::infinity();
      } catch (const CollisionError&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    VecX r;
    double nr = safe_norm(z, &r);
    if (!std::isfinite(nr)) throw ShootingError("shooting guess collides or overflows", nr, z);
    int it = 0;
    for (; it < opt_.max_iterations && nr > opt_.polish; ++it) {
      const VecX dz = jacobian(z).fullPivLu().solve(-r);
      if (!dz.allFinite()) break;
      double a = 1.0;
      bool accepted = false;
      for (int k = 0; k <= opt_.max_halvings; ++k, a *= 0.5) {
        VecX trial = z + a * dz;
        VecX rt;
        const double nt = safe_norm(trial, &rt);
        if (nt < nr) {
          z = std::move(trial);
          r = std::move(rt);
          nr = nt;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (!(nr <= opt_.tolerance))
      throw ShootingError("multiple shooting did not converge after " + std::to_string(it) + " iterations", nr, z);
    ShootingSolution sol = assemble(z);
    sol.residual = nr;
    sol.iterations = it;
    if (mode_ == TerminalMode::Section && pb_.params.u_max > 0.0 &&
        !(ray_projection(sol.trajectory.back().vec(), pb_.reference_terminal().vec(), theta_) > 0.0))
      throw ShootingError("converged onto the opposite ray", nr, z);
    return sol;
  }

  ShootingSolution assemble(const VecX& z) const {
    ShootingSolution sol;
    sol.theta = theta_;
    sol.iterate = z;
    sol.law = opt_.law;
    DiscreteTrajectory& tr = sol.trajectory;
    tr.h = pb_.params.h;
    tr.params = pb_.params;
    const int n = arcs();
    Eigen::Matrix<double, 8, 1> end = Eigen::Matrix<double, 8, 1>::Zero();
    for (int i = 0; i < n; ++i) {
      ArcRecord rec;
      end = arc(arc_state(z, i), arc_costate(z, i), bounds_[i], bounds_[i + 1], &rec);
      // Junction samples belong to the arc that starts there.
      if (i > 0) {
        sol.defect = std::max(sol.defect, (tr.states.back().vec() - rec.states.front()).cwiseAbs().maxCoeff());
        sol.defect = std::max(sol.defect, (sol.costates.back().vec() - rec.costates.front()).cwiseAbs().maxCoeff());
        tr.states.pop_back();
        sol.costates.pop_back();
      }
      for (const auto& s : rec.states) tr.states.push_back(StateVec::from(s));
      for (const auto& l : rec.costates) sol.costates.push_back(CostateVec::from(l));
      for (const auto& u : rec.controls) tr.controls.push_back(ControlVec::from(u));
    }
    const Vec4 xN = end.head<4>();
    if (mode_ == TerminalMode::Section) {
      sol.beta = z.tail<2>();
      sol.terminal_residual = terminal_constraints(xN, pb_.reference_terminal().vec(), pb_.section, theta_).norm();
      sol.transversality =
          (end.tail<4>() - terminal_costate(xN, pb_.reference_terminal().vec(), pb_.section, theta_, sol.beta)).norm();
    } else {
      sol.terminal_residual = (xN - target_).norm();
    }
    sol.terminal.state = StateVec::from(xN);
    sol.terminal.coords = {xN[0], xN[2]};
    sol.terminal.t = tr.duration();
    sol.terminal.step = pb_.N;
    return sol;
  }

 private:
  Vec4 arc_state(const VecX& z, int i) const { return i == 0 ? pb_.x0.vec() : Vec4(z.segment<4>(4 + 8 * (i - 1))); }
  Vec4 arc_costate(const VecX& z, int i) const { return i == 0 ? Vec4(z.head<4>()) : Vec4(z.segment<4>(8 + 8 * (i - 1))); }
  Eigen::Index terminal_rows() const { return mode_ == TerminalMode::Section ? 6 : 4; }

  VecX terminal_residual(const VecX& z, const Eigen::Matrix<double, 8, 1>& end) const {
    const Vec4 xN = end.head<4>();
    VecX r(terminal_rows());
    if (mode_ == TerminalMode::Section) {
      const Vec4& xn = pb_.reference_terminal().vec();
      const Vec2 beta = z.tail<2>();
      r.head<2>() = terminal_constraints(xN, xn, pb_.section, theta_);
      r.tail<4>() = end.tail<4>() - terminal_costate(xN, xn, pb_.section, theta_, beta);
    } else {
      r = xN - target_;
    }
    return r;
  }

  // d(terminal rows)/d(x_N, lambda_N).
  MatX terminal_end_gradient() const {
    MatX g = MatX::Zero(terminal_rows(), 8);
    if (mode_ == TerminalMode::Section) {
      g.block(0, 0, 2, 4) = terminal_constraint_gradient(pb_.section, theta_);
      g(2, 0) = 1.0;  // -d(-dx)/dx
      g(4, 2) = 1.0;  // -d(-dxd)/dxd
      g.block(2, 4, 4, 4) = Mat4::Identity();
    } else {
      g.block(0, 0, 4, 4) = Mat4::Identity();
    }
    return g;
  }

  const ReachProblem& pb_;
  TerminalMode mode_;
  double theta_;
  Vec4 target_;
  ShootingOptions opt_;
  std::vector<std::size_t> bounds_;
};

inline ShootingSolution shooting_solve(const ReachProblem& pb, double theta, const CostateGuess& guess,
                                       const ShootingOptions& opt = {}) {
  const MultipleShooting ms(pb, TerminalMode::Section, theta, Vec4::Zero(), opt);
  return ms.solve(ms.expand(guess));
}

/// Warm start from a previous iterate with the same layout.
inline ShootingSolution shooting_solve(const ReachProblem& pb, double theta, const VecX& iterate,
                                       const ShootingOptions& opt = {}) {
  const MultipleShooting ms(pb, TerminalMode::Section, theta, Vec4::Zero(), opt);
  return ms.solve(iterate);
}

/// Linearization of the terminal map about the reference trajectory:
/// x_N - xn_N ~ sum_k G_k u_k with G_k = Phi(N, k+1) B.
class LinearReach {
 public:
  explicit LinearReach(const ReachProblem& pb) : pb_(pb) {
    const auto& st = pb.reference.states;
    g_.resize(pb.N);
    Mat4 p = Mat4::Identity();
    const auto b = control_jacobian(pb.params.h);
    for (std::size_t k = pb.N; k-- > 0;) {
      g_[k] = p * b;
      p = p * vi_jacobian(st[k].vec(), pb.params.h, pb.params.mu);
    }
    phi_ = p;
  }

  const Mat4& transition() const { return phi_; }

  /// Support point of the linearized reachable set in direction c.
  Vec4 support(const Vec4& c, double u) const {
    Vec4 d = Vec4::Zero();
    for (const auto& g : g_) {
      const Vec2 w = g.transpose() * c;
      const double n = w.norm();
      if (n > 0.0) d += g * (u * w / n);
    }
    return d;
  }

  /// Direction c = (cos psi, 0, sin psi, 0) + t n whose support point lies
  /// on the section (n is the section normal in position space).
  Vec4 section_direction(double psi, double u) const {
    const Vec4 nrm(-std::sin(pb_.section.alpha), std::cos(pb_.section.alpha), 0.0, 0.0);
    const Vec4 base(std::cos(psi), 0.0, std::sin(psi), 0.0);
    auto f = [&](double t) { return nrm.dot(support(base + t * nrm, u)); };
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 200 && f(lo) > 0.0; ++i) lo *= 2.0;
    for (int i = 0; i < 200 && f(hi) < 0.0; ++i) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++i) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0.0 ? hi : lo) = mid;
    }
    return base + 0.5 * (lo + hi) * nrm;
  }

  double support_angle(double psi, double u) const {
    const Vec4 d = support(section_direction(psi, u), u);
    return std::atan2(d[2], d[0]);
  }

  /// Costate guess whose linearized terminal point lies on the theta ray.
  CostateGuess seed(double theta, double u, int grid = 180) const {
    const double two_pi = 2.0 * std::numbers::pi;
    auto err = [&](double psi) { return std::remainder(support_angle(psi, u) - theta, two_pi); };
    double lo = 0.0, elo = err(0.0);
    bool found = false;
    for (int i = 1; i <= grid && !found; ++i) {
      const double psi = two_pi * i / grid;
      const double e = err(psi);
      if (elo <= 0.0 && e > 0.0 && e - elo < std::numbers::pi) {
        found = true;
        double hi = psi;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (err(mid) > 0.0 ? hi : lo) = mid;
        }
        lo = 0.5 * (lo + hi);
      } else {
        lo = psi;
        elo = e;
      }
    }
    if (!found) throw NumericalError("linearized reachable set has no support point on the requested ray");
    const double psi = lo;
    const Vec4 c = section_direction(psi, u);
    const Vec4 d = support(c, u);
    const double rho = d[0] * std::cos(theta) + d[2] * std::sin(theta);
    const double kappa = rho / (std::cos(psi) * std::cos(theta) + std::sin(psi) * std::sin(theta));
    const Vec4 lam_n = -kappa * c;
    CostateGuess g;
    g.lambda0 = phi_.transpose() * lam_n;
    const double t = c[1] * std::cos(pb_.section.alpha) - c[0] * std::sin(pb_.section.alpha) +
                     std::cos(psi) * std::sin(pb_.section.alpha);
    g.beta[0] = -kappa * t;
    g.beta[1] = -lam_n[0] * std::sin(theta) + lam_n[2] * std::cos(theta);
    return g;
  }

 private:
  const ReachProblem& pb_;
  std::vector<Eigen::Matrix<double, 4, 2>> g_;
  Mat4 phi_;
};

struct ReachOptions {
  ShootingOptions shooting;
  bool continuation = true;  // warm-start each angle from the previous one
  double seed_u = 1e-3;      // thrust bound used for the linear seed
  double u_growth = 1.5;     // initial thrust continuation factor
  double min_theta_step = 1e-4;
  int threads = 1;           // used only without continuation
};

namespace detail {

/// Linear seed at a small thrust bound, then continuation in u_max.
inline ShootingSolution solve_from_scratch(const ReachProblem& pb, double theta, const ReachOptions& opt) {
  const double umax = pb.params.u_max;
  if (umax == 0.0) return shooting_solve(pb, theta, CostateGuess{}, opt.shooting);
  ReachProblem work = pb;
  double u = std::min(umax, opt.seed_u);
  work.params.u_max = u;
  const CostateGuess seed = LinearReach(pb).seed(theta, u);
  ShootingSolution sol = shooting_solve(work, theta, seed, opt.shooting);
  double fac = opt.u_growth;
  while (u < umax) {
    const double un = std::min(umax, u * fac);
    // Costates and multipliers scale with the displacement, i.e. with u.
    CostateGuess g;
    g.lambda0 = sol.costates.front().vec() * (un / u);
    g.beta = sol.beta * (un / u);
    work.params.u_max = un;
    try {
      sol = shooting_solve(work, theta, g, opt.shooting);
      u = un;
      fac = std::min(opt.u_growth, 1.0 + 2.0 * (fac - 1.0));
    } catch (const NumericalError&) {
      fac = 1.0 + 0.5 * (fac - 1.0);
      if (fac < 1.0 + 1e-4) throw NumericalError("thrust continuation stalled at u_max = " + std::to_string(u));
    }
  }
  return sol;
}

/// Continuation in theta from a converged solution, halving the angle step
/// on failure.
inline ShootingSolution continue_theta(const ReachProblem& pb, const ShootingSolution& from, double theta,
                                       const ReachOptions& opt) {
  ShootingSolution cur = from;
  // Angles are periodic; go the short way round.
  const double goal = theta;
  theta = from.theta + std::remainder(theta - from.theta, 2.0 * std::numbers::pi);
  double step = theta - from.theta;
  while (cur.theta != theta) {
    const double next = std::abs(theta - cur.theta) <= std::abs(step) ? theta : cur.theta + step;
    try {
      cur = shooting_solve(pb, next, cur.iterate, opt.shooting);
      step *= 2.0;
    } catch (const NumericalError&) {
      step *= 0.5;
      if (std::abs(step) < opt.min_theta_step) throw NumericalError("angle continuation stalled");
    }
  }
  cur.theta = goal;
  return cur;
}

}  // namespace detail

struct ReachPoint {
  double theta = 0.0;
  Point2 point;  // (x, xd) on the section
  bool converged = false;
  double residual = 0.0;
  int iterations = 0;
  std::string message;
  std::optional<ShootingSolution> solution;
};

struct ReachableSet {
  std::vector<ReachPoint> points;  // ordered as the requested angles
  Point2 control_free;
  double u_max = 0.0;

  std::size_t converged_count() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const auto& p) { return p.converged; }));
  }
  double converged_fraction() const {
    return points.empty() ? 0.0 : static_cast<double>(converged_count()) / static_cast<double>(points.size());
  }
  geom::Polygon polygon() const {
    geom::Polygon poly;
    for (const auto& p : points)
      if (p.converged) poly.push_back(p.point);
    return poly;
  }
};

inline std::vector<double> theta_grid(std::size_t n) {
  if (n < 1) throw std::domain_error("theta grid needs at least one angle");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return out;
}

/// Sweeps the ray angle and collects the extremal terminal points. With
/// continuation each angle starts from the previous converged one and falls
/// back to a fresh seed when that fails.
inline ReachableSet reachable_set(const ReachProblem& pb, const std::vector<double>& thetas, const ReachOptions& opt = {}) {
  if (thetas.empty()) throw std::domain_error("theta list must be nonempty");
  ReachableSet set;
  set.u_max = pb.params.u_max;
  set.control_free = {pb.reference_terminal().x, pb.reference_terminal().vx};
  set.points.resize(thetas.size());

  auto record = [&](std::size_t i, const ShootingSolution& s) {
    ReachPoint& p = set.points[i];
    p.theta = thetas[i];
    p.point = s.section_point();
    p.converged = true;
    p.residual = s.residual;
    p.iterations = s.iterations;
    p.solution = s;
  };
  auto fail = [&](std::size_t i, const std::exception& e) {
    set.points[i].theta = thetas[i];
    set.points[i].message = e.what();
  };

  if (opt.continuation) {
    std::optional<ShootingSolution> prev;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      try {
        if (!prev) throw NumericalError("no previous solution");
        prev = detail::continue_theta(pb, *prev, thetas[i], opt);
        record(i, *prev);
        continue;
      } catch (const NumericalError&) {
      }
      try {
        prev = detail::solve_from_scratch(pb, thetas[i], opt);
        record(i, *prev);
      } catch (const NumericalError& e) {
        fail(i, e);
      }
    }
    // Repair pass: failed angles (typically the very first one) retried by
    // continuation from a converged neighbour, walking backwards.
    const std::size_t n = thetas.size();
    for (std::size_t pass = 0; pass < 2; ++pass) {
      for (std::size_t k = n; k-- > 0;) {
        if (set.points[k].converged) continue;
        for (const std::size_t nb : {(k + 1) % n, (k + n - 1) % n}) {
          if (nb == k || !set.points[nb].converged) continue;
          try {
            record(k, detail::continue_theta(pb, *set.points[nb].solution, thetas[k], opt));
            set.points[k].message.clear();
            break;
          } catch (const NumericalError& e) {
            fail(k, e);
          }
        }
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex mtx;
    auto worker = [&] {
      for (std::size_t i = next++; i < thetas.size(); i = next++) {
        try {
          const ShootingSolution s = detail::solve_from_scratch(pb, thetas[i], opt);
          const std::lock_guard lock(mtx);
          record(i, s);
        } catch (const NumericalError& e) {
          const std::lock_guard lock(mtx);
          fail(i, e);
        }
      }
    };
    const int nt = std::max(1, opt.threads);
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }
  if (2 * set.converged_count() < thetas.size())
    throw NumericalError("reachable set: only " + std::to_string(set.converged_count()) + " of " +
                         std::to_string(thetas.size()) + " angles converged");
  return set;
}

struct TransferOptions {
  ShootingOptions shooting{.law = ControlLaw::SaturatedEffort};
  double min_homotopy_step = 1e-4;
  std::size_t max_candidates = 6;
};

struct TransferAttempt {
  Point2 section_point;
  bool boundary = false;  // from a boundary-boundary intersection
  std::string message;    // empty on success
};

struct TransferDesign {
  geom::Polygon reach_polygon;
  geom::Polygon target_polygon;
  std::vector<Point2> intersections;  // reach boundary x target ring
  std::vector<TransferAttempt> attempts;
  Point2 section_point;  // chosen design point (x, xd)
  StateVec target;       // completed terminal state
  double target_energy = 0.0;
  ShootingSolution solution;
  double terminal_error = 0.0;
  double time_of_flight = 0.0;
};

/// Completes a section point (x, xd) on y = 0 to a full state at energy E.
inline StateVec complete_state(const Point2& q, double energy, double vy_sign, const SystemParams& p) {
  const double v2 = 2.0 * (energy + effective_potential(q.x, 0.0, p.mu)) - q.y * q.y;
  if (v2 < 0.0) throw NumericalError("section point is energy-infeasible (negative discriminant)");
  return {q.x, 0.0, q.y, std::copysign(std::sqrt(v2), vy_sign)};
}

/// Solves for the full terminal state x_N = target with the saturated
/// effort law, by homotopy on the target from the control-free terminal
/// state (where lambda = 0 is exact).
inline ShootingSolution solve_fixed_terminal(const ReachProblem& pb, const Vec4& target, const TransferOptions& opt = {}) {
  const Vec4 start = pb.reference_terminal().vec();
  VecX z;
  double tau = 0.0, step = 1.0;
  std::optional<ShootingSolution> sol;
  while (tau < 1.0) {
    const double next = std::min(1.0, tau + step);
    const MultipleShooting ms(pb, TerminalMode::FixedState, 0.0, start + next * (target - start), opt.shooting);
    if (z.size() == 0) z = ms.expand(CostateGuess{});
    try {
      sol = ms.solve(z);
      z = sol->iterate;
      tau = next;
      step = std::min(1.0, 2.0 * step);
    } catch (const NumericalError&) {
      step *= 0.5;
      if (step < opt.min_homotopy_step)
        throw NumericalError("transfer homotopy stalled at fraction " + std::to_string(tau));
    }
  }
  return *sol;
}

/// Intersects the reachable-set polygon with the ring of target crossings,
/// completes a common point to a full state at the target energy and
/// re-solves with the terminal state fixed.
///
/// Candidates are the boundary-boundary intersections first, then the target
/// crossings lying inside the reach polygon, each group nearest to the
/// control-free point first. A point on the boundary of the projected set is
/// reachable with one yd only, which the energy completion rarely matches,
/// so interior crossings are the usual outcome.
inline TransferDesign design_transfer(const ReachProblem& pb, const ReachableSet& reach,
                                      const std::vector<SectionCrossing>& target_crossings, double target_energy,
                                      const TransferOptions& opt = {}) {
  TransferDesign d;
  d.reach_polygon = reach.polygon();
  if (d.reach_polygon.size() < 3) throw NumericalError("reachable set has fewer than three converged points");
  std::vector<Point2> pts;
  for (const auto& c : target_crossings) pts.push_back(c.coords);
  if (pts.size() < 2) throw NumericalError("target region has fewer than two crossings");
  d.target_polygon = geom::order_by_angle(pts);
  d.target_energy = target_energy;

  const auto& rp = d.reach_polygon;
  const auto& tp = d.target_polygon;
  for (std::size_t i = 0; i < rp.size(); ++i)
    for (std::size_t j = 0; j < tp.size(); ++j)
      if (auto hit = geom::segment_intersection(rp[i], rp[(i + 1) % rp.size()], tp[j], tp[(j + 1) % tp.size()]))
        d.intersections.push_back(hit->point);

  const Point2 cf = reach.control_free;
  auto by_distance = [&](std::vector<Point2> v) {
    std::stable_sort(v.begin(), v.end(), [&](const Point2& a, const Point2& b) {
      return std::hypot(a.x - cf.x, a.y - cf.y) < std::hypot(b.x - cf.x, b.y - cf.y);
    });
    return v;
  };
  std::vector<TransferAttempt> queue;
  for (const auto& q : by_distance(d.intersections)) queue.push_back({q, true, {}});
  std::vector<Point2> inside;
  for (const auto& q : pts)
    if (geom::contains(rp, q)) inside.push_back(q);
  for (const auto& q : by_distance(inside)) queue.push_back({q, false, {}});
  if (queue.empty()) throw NumericalError("no transfer at this horizon: reach set misses the target region");
  if (queue.size() > opt.max_candidates) queue.resize(opt.max_candidates);

  for (auto& a : queue) {
    // yd sign from the nearest crossing of the chosen cluster.
    const auto nearest = std::min_element(target_crossings.begin(), target_crossings.end(), [&](const auto& u, const auto& v) {
      return std::hypot(u.coords.x - a.section_point.x, u.coords.y - a.section_point.y) <
             std::hypot(v.coords.x - a.section_point.x, v.coords.y - a.section_point.y);
    });
    try {
      const StateVec target = complete_state(a.section_point, target_energy, nearest->state.vy, pb.params);
      d.solution = solve_fixed_terminal(pb, target.vec(), opt);
      d.section_point = a.section_point;
      d.target = target;
      d.attempts.push_back(a);
      d.terminal_error = (d.solution.trajectory.back().vec() - d.target.vec()).norm();
      d.time_of_flight = d.solution.trajectory.duration();
      return d;
    } catch (const NumericalError& e) {
      a.message = e.what();
      d.attempts.push_back(a);
    }
  }
  throw NumericalError("no transfer at this horizon: none of " + std::to_string(queue.size()) +
                       " candidate target states is reachable (last: " + d.attempts.back().message + ")");
}

}  // namespace crtbp
