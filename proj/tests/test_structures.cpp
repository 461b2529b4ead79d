#include <cmath>

#include <gtest/gtest.h>

#include "crtbp/structures.hpp"

using namespace crtbp;

namespace {

constexpr double kMu = 0.0125;
const SystemParams kParams{kMu, 1e-3, 0.0};

const PeriodicOrbit& lyapunov() {
  static const PeriodicOrbit orbit = find_periodic_orbit(kParams, OrbitTarget::initial_x(0.8156));
  return orbit;
}

PoincareSection moon_section() {
  PoincareSection s;
  s.anchor = {1.0 - kMu, 0.0};
  s.half_line = true;
  return s;
}

}  // namespace

TEST(PeriodicOrbit, PerpendicularCrossingsAndClosure) {
  const auto& o = lyapunov();
  EXPECT_EQ(o.initial.x, 0.8156);
  EXPECT_EQ(o.initial.y, 0.0);
  EXPECT_EQ(o.initial.vx, 0.0);
  const auto& half = o.trajectory.states[o.half_steps];
  EXPECT_LE(std::abs(half.vx), 1e-10);
  EXPECT_LE(std::abs(half.y), 1e-10);
  EXPECT_LE((o.trajectory.back().vec() - o.initial.vec()).norm(), 1e-9);
  EXPECT_EQ(o.trajectory.steps(), 2 * o.half_steps);
  EXPECT_NEAR(o.period, o.step * static_cast<double>(o.trajectory.steps()), 1e-12);
  // Period close to the linear L1 value 2 pi / omega, bigger at finite amplitude.
  EXPECT_GT(o.period, 2.6);
  EXPECT_LT(o.period, 3.0);
}

TEST(PeriodicOrbit, SymmetricUnderReflection) {
  const auto& o = lyapunov();
  const std::size_t n = o.trajectory.steps();
  for (std::size_t k = 0; k <= n; k += 97) {
    const Vec4 a = o.trajectory.states[k].vec();
    const Vec4 b = reflect(o.trajectory.states[n - k].vec());
    EXPECT_LE((a - b).norm(), 1e-8) << "k = " << k;
  }
}

TEST(PeriodicOrbit, EnergyConstantToIntegratorAccuracy) {
  const auto rep = energy_report(lyapunov().trajectory);
  EXPECT_LT(rep.max_deviation, 1e-6);
  EXPECT_NEAR(lyapunov().energy, jacobi_integral(lyapunov().initial, kParams), 1e-14);
}

TEST(PeriodicOrbit, FailsLoudlyWhenIterationsRunOut) {
  OrbitCorrectorOptions opt;
  opt.max_iterations = 1;
  EXPECT_THROW(find_periodic_orbit(kParams, OrbitTarget::initial_x(0.8156), opt), NumericalError);
}

TEST(Monodromy, UnitDeterminantAndReciprocalPair) {
  const auto m = monodromy(lyapunov());
  EXPECT_NEAR(m.determinant(), 1.0, 1e-6);
  EXPECT_GT(m.unstable_value, 1.0);
  EXPECT_NEAR(m.unstable_value * m.stable_value, 1.0, 1e-6);
  // The remaining pair sits on the unit circle (trivial multipliers).
  EXPECT_NEAR(std::abs(m.eigen[1].value), 1.0, 1e-6);
  EXPECT_NEAR(std::abs(m.eigen[2].value), 1.0, 1e-6);
}

TEST(Monodromy, EigenvectorsSatisfyEigenEquation) {
  const auto m = monodromy(lyapunov());
  const Vec4 vu = m.unstable_vector, vs = m.stable_vector;
  EXPECT_LE((m.matrix * vu - m.unstable_value * vu).norm(), 1e-6 * m.unstable_value * vu.norm());
  EXPECT_LE((m.matrix * vs - m.stable_value * vs).norm(), 1e-6 * vs.norm());
}

TEST(Manifold, UnstableInteriorBranchReachesMoonSection) {
  ManifoldOptions opt;
  opt.epsilon = 1e-4;
  opt.stop = moon_section();
  const auto br = globalize_manifold(lyapunov(), opt);
  ASSERT_EQ(br.trajectories.size(), 20u);
  const auto cs = br.crossings();
  EXPECT_EQ(cs.size(), 20u);
  for (const auto& c : cs) {
    EXPECT_GE(c.state.x, 1.0 - kMu);
    EXPECT_NEAR(c.state.y, 0.0, 1e-12);
  }
  EXPECT_GE(br.mean_time_of_flight(), 2.5);
  EXPECT_LE(br.mean_time_of_flight(), 3.7);
}

TEST(Manifold, TimeOfFlightShrinksWithLargerPerturbation) {
  // The branch leaves the orbit like exp(lambda t): each decade of epsilon
  // saves about ln(10) / lambda_per_unit_time.
  ManifoldOptions opt;
  opt.stop = moon_section();
  opt.n_traj = 8;
  opt.epsilon = 1e-5;
  const double t5 = globalize_manifold(lyapunov(), opt).mean_time_of_flight();
  opt.epsilon = 1e-4;
  const double t4 = globalize_manifold(lyapunov(), opt).mean_time_of_flight();
  EXPECT_GT(t5, t4);
  const double rate = std::log(monodromy(lyapunov()).unstable_value) / lyapunov().period;
  EXPECT_NEAR(t5 - t4, std::log(10.0) / rate, 0.35 * std::log(10.0) / rate);
}

TEST(Manifold, StableBranchIsTheTimeReflectionOfTheUnstableOne) {
  ManifoldOptions opt;
  opt.epsilon = 1e-4;
  opt.n_traj = 4;
  opt.t_max = 1.0;
  opt.stop.reset();
  const auto u = globalize_manifold(lyapunov(), opt);
  opt.stability = Stability::Stable;
  const auto s = globalize_manifold(lyapunov(), opt);
  ASSERT_EQ(u.trajectories.size(), s.trajectories.size());
  for (const auto& t : s.trajectories) EXPECT_GT(t.trajectory.steps(), 0u);
}

TEST(Manifold, RejectsBadOptions) {
  ManifoldOptions opt;
  opt.epsilon = 0.0;
  EXPECT_THROW(globalize_manifold(lyapunov(), opt), std::domain_error);
  opt.epsilon = 1e-6;
  opt.n_traj = 0;
  EXPECT_THROW(globalize_manifold(lyapunov(), opt), std::domain_error);
}

TEST(TargetRegion, SplitsCrossingsByDirection) {
  PoincareSection sec;
  sec.anchor = lagrange_points(kParams)[1];
  sec.half_line = true;
  const auto r = target_orbit_region(kParams, {1.05, 0.0, 0.0, 0.35}, 20.0, sec);
  EXPECT_FALSE(r.escaped);
  EXPECT_EQ(r.ascending.size() + r.descending.size(), r.crossings.size());
  EXPECT_GT(r.descending.size(), 10u);
  for (const auto& c : r.descending) EXPECT_LT(c.state.vy, 0.0);
  for (const auto& c : r.ascending) EXPECT_GT(c.state.vy, 0.0);
  EXPECT_DOUBLE_EQ(r.energy, jacobi_integral(StateVec{1.05, 0.0, 0.0, 0.35}, kParams));
}

TEST(Section, DetectsCrossingsWithInterpolatedState) {
  const auto traj = propagate({0.8156, 0.0, 0.0, 0.1922}, 3000, kParams);
  PoincareSection sec;  // y = 0 through the origin
  const auto cs = detect_crossings(traj, sec);
  ASSERT_FALSE(cs.empty());
  for (const auto& c : cs) {
    EXPECT_LE(std::abs(c.state.y), 1e-6);
    EXPECT_EQ(c.coords.x, c.state.x);
    EXPECT_EQ(c.coords.y, c.state.vx);
    EXPECT_GE(c.t, traj.time(c.step));
    EXPECT_LE(c.t, traj.time(c.step + 1));
  }
  sec.direction = CrossingDirection::Ascending;
  for (const auto& c : detect_crossings(traj, sec)) EXPECT_GT(c.state.vy, 0.0);
  sec.alpha = 7.0;
  EXPECT_THROW(sec.validate(), std::domain_error);
}
