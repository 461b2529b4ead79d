#include <cmath>
#include <random>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <gtest/gtest.h>

#include "crtbp/dynamics.hpp"

using namespace crtbp;

namespace {

constexpr double kMu = 0.0125;

// Long-double rendering of U straight from its definition.
long double potential_ld(long double x, long double y, long double mu) {
  const long double r1 = std::sqrt((x + mu) * (x + mu) + y * y);
  const long double r2 = std::sqrt((x - 1 + mu) * (x - 1 + mu) + y * y);
  return 0.5L * (x * x + y * y) + (1 - mu) / r1 + mu / r2;
}

}  // namespace

TEST(MassParameter, EarthMoonRatio) {
  EXPECT_DOUBLE_EQ(mass_parameter(81.0, 1.0), 1.0 / 82.0);
  EXPECT_DOUBLE_EQ(mass_parameter(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(mass_parameter(1.0, 1.0), 0.5);
  EXPECT_THROW(mass_parameter(0.0, 1.0), std::domain_error);
  EXPECT_THROW(mass_parameter(1.0, -1.0), std::domain_error);
  EXPECT_THROW(mass_parameter(1.0, 2.0), std::domain_error);
}

TEST(Potential, MatchesLongDoubleDefinition) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-1.5, 1.5), uy(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng);
    const double ref = static_cast<double>(potential_ld(x, y, kMu));
    EXPECT_NEAR(effective_potential(x, y, kMu), ref, 1e-13 * std::abs(ref));
  }
}

TEST(Potential, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.4, 1.2), uy(-0.3, 0.3);
  const double d = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const double x = ux(rng), y = uy(rng);
    if (std::hypot(x - 1 + kMu, y) < 0.05) continue;
    const Vec2 g = grad_U(x, y, kMu);
    const double gx = static_cast<double>((potential_ld(x + d, y, kMu) - potential_ld(x - d, y, kMu)) / (2 * d));
    const double gy = static_cast<double>((potential_ld(x, y + d, kMu) - potential_ld(x, y - d, kMu)) / (2 * d));
    EXPECT_NEAR(g[0], gx, 1e-7 * (1 + std::abs(gx)));
    EXPECT_NEAR(g[1], gy, 1e-7 * (1 + std::abs(gy)));
  }
}

TEST(Potential, SymmetricInY) {
  EXPECT_DOUBLE_EQ(effective_potential(0.7, 0.2, kMu), effective_potential(0.7, -0.2, kMu));
}

TEST(Potential, CollisionRaises) {
  EXPECT_THROW(effective_potential(1.0 - kMu, 0.0, kMu), CollisionError);
  EXPECT_THROW(grad_U(-kMu, 0.0, kMu), CollisionError);
  // A massless secondary is not a collision.
  EXPECT_NO_THROW(effective_potential(1.0, 0.0, 0.0));
}

TEST(Potential, TwoBodyLimitMatchesKepler) {
  // mu = 0: U = (x^2 + y^2)/2 + 1/r.
  EXPECT_DOUBLE_EQ(effective_potential(2.0, 0.0, 0.0), 2.0 + 0.5);
}

TEST(SystemParams, ValidateRejectsBadValues) {
  EXPECT_THROW((SystemParams{0.6, 1e-3, 0.0}.validate()), std::domain_error);
  EXPECT_THROW((SystemParams{0.01, 0.0, 0.0}.validate()), std::domain_error);
  EXPECT_THROW((SystemParams{0.01, 1e-3, -1.0}.validate()), std::domain_error);
  EXPECT_NO_THROW(SystemParams{}.validate());
}

TEST(Dynamics, JacobiIntegralConservedUnderTightRk) {
  // Oracle: adaptive Runge-Kutta-Fehlberg 7(8) at 1e-13.
  using State = std::array<double, 4>;
  namespace odeint = boost::numeric::odeint;
  auto rhs = [](const State& s, State& ds, double) {
    const Vec4 d = continuous_dynamics(Vec4(s[0], s[1], s[2], s[3]), Vec2::Zero(), kMu);
    for (int i = 0; i < 4; ++i) ds[static_cast<std::size_t>(i)] = d[i];
  };
  State s{0.75, 0.0, 0.0, 0.2883};
  const double e0 = jacobi_integral(Vec4(s[0], s[1], s[2], s[3]), kMu);
  odeint::integrate_adaptive(odeint::make_controlled<odeint::runge_kutta_fehlberg78<State>>(1e-13, 1e-13), rhs, s,
                             0.0, 5.0, 1e-3);
  EXPECT_NEAR(jacobi_integral(Vec4(s[0], s[1], s[2], s[3]), kMu), e0, 1e-11);
}

TEST(Dynamics, ControlEntersVelocityRowsOnly) {
  const Vec4 s(0.8, 0.1, 0.05, -0.2);
  const Vec4 d0 = continuous_dynamics(s, Vec2::Zero(), kMu);
  const Vec4 d1 = continuous_dynamics(s, Vec2(0.3, -0.7), kMu);
  EXPECT_EQ(d0[0], d1[0]);
  EXPECT_EQ(d0[1], d1[1]);
  EXPECT_NEAR(d1[2] - d0[2], 0.3, 1e-15);
  EXPECT_NEAR(d1[3] - d0[3], -0.7, 1e-15);
}

TEST(Lagrange, GradientVanishesAtAllFive) {
  const auto lp = lagrange_points(SystemParams{kMu, 1e-3, 0.0});
  for (int i = 1; i <= 5; ++i) EXPECT_LE(grad_U(lp[i].x, lp[i].y, kMu).norm(), 1e-12) << "L" << i;
}

TEST(Lagrange, EquilateralPointsExact) {
  const auto lp = lagrange_points(SystemParams{kMu, 1e-3, 0.0});
  EXPECT_NEAR(lp[4].x, 0.5 - kMu, 1e-14);
  EXPECT_NEAR(lp[4].y, std::sqrt(3.0) / 2.0, 1e-14);
  EXPECT_NEAR(lp[5].x, 0.5 - kMu, 1e-14);
  EXPECT_NEAR(lp[5].y, -std::sqrt(3.0) / 2.0, 1e-14);
}

TEST(Lagrange, CollinearPointsMatchToms748Oracle) {
  const auto lp = lagrange_points(SystemParams{kMu, 1e-3, 0.0});
  auto f = [](double x) { return grad_U(x, 0.0, kMu)[0]; };
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  const struct {
    int idx;
    double lo, hi;
  } cases[] = {{1, 0.5, 1.0 - kMu - 1e-3}, {2, 1.0 - kMu + 1e-3, 1.5}, {3, -1.5, -kMu - 1e-3}};
  for (const auto& c : cases) {
    std::uintmax_t it = 200;
    const auto r = boost::math::tools::toms748_solve(f, c.lo, c.hi, tol, it);
    EXPECT_NEAR(lp[c.idx].x, 0.5 * (r.first + r.second), 1e-12) << "L" << c.idx;
    EXPECT_EQ(lp[c.idx].y, 0.0);
  }
  // Ordering: L3 < -mu < L1 < 1 - mu < L2.
  EXPECT_LT(lp[3].x, -kMu);
  EXPECT_GT(lp[1].x, -kMu);
  EXPECT_LT(lp[1].x, 1 - kMu);
  EXPECT_GT(lp[2].x, 1 - kMu);
}

TEST(Lagrange, RejectsDegenerateMu) {
  EXPECT_THROW(lagrange_points(SystemParams{0.0, 1e-3, 0.0}), std::domain_error);
  EXPECT_THROW(lagrange_points(SystemParams{0.5, 1e-3, 0.0}), std::domain_error);
}

TEST(Lagrange, EquilibriaAreStationaryForTheFlow) {
  const auto lp = lagrange_points(SystemParams{kMu, 1e-3, 0.0});
  for (int i = 1; i <= 5; ++i)
    EXPECT_LE(continuous_dynamics(Vec4(lp[i].x, lp[i].y, 0, 0), Vec2::Zero(), kMu).norm(), 1e-12);
}
