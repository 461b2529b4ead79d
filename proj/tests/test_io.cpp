#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "crtbp/io.hpp"
#include "crtbp/svg.hpp"

using namespace crtbp;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

DiscreteTrajectory sample_trajectory() {
  const SystemParams p{0.0125, 1e-3, 0.1};
  std::vector<ControlVec> u;
  for (int k = 0; k < 200; ++k) u.push_back({0.1 * std::cos(0.01 * k), -0.1 * std::sin(0.03 * k)});
  return propagate({0.8156, 0.0, 0.0, 0.1922}, u, 200, p);
}

}  // namespace

TEST(Format, ShortestRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t bits = rng();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_TRUE(same_bits(io::parse_double(io::fmt(v)), v)) << io::fmt(v);
  }
  EXPECT_EQ(io::fmt(0.1), "0.1");
  EXPECT_EQ(io::fmt(1e-3), "0.001");
  EXPECT_THROW(io::parse_double("1.5x"), io::IoError);
  EXPECT_THROW(io::parse_double(""), io::IoError);
}

TEST(Csv, TrajectoryTableRoundTrip) {
  const auto traj = sample_trajectory();
  const auto t = io::trajectory_table(traj);
  EXPECT_EQ(t.header, io::kTrajectoryColumns);
  const std::string text = t.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,x,y,vx,vy,ux,uy");
  const auto back = io::Table::parse(text);
  ASSERT_EQ(back.rows.size(), traj.states.size());
  for (std::size_t k = 0; k < back.rows.size(); ++k) {
    EXPECT_TRUE(same_bits(back.rows[k][1], traj.states[k].x));
    EXPECT_TRUE(same_bits(back.rows[k][4], traj.states[k].vy));
  }
  // Final state carries no control.
  EXPECT_EQ(back.rows.back()[5], 0.0);
}

TEST(Csv, RowWidthMismatchIsAnError) {
  io::Table t{{"a", "b"}, {{1.0}}};
  EXPECT_THROW(t.str(), io::IoError);
  EXPECT_THROW(io::Table::parse("a,b\n1,2,3\n"), io::IoError);
  EXPECT_THROW(io::Table::parse(""), io::IoError);
}

TEST(Json, TrajectoryRoundTripIsBitExact) {
  const auto traj = sample_trajectory();
  const std::string text = io::to_json(traj).dump();
  const auto back = io::trajectory_from_json(nlohmann::json::parse(text));
  ASSERT_EQ(back.states.size(), traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) EXPECT_EQ(back.states[k], traj.states[k]);
  for (std::size_t k = 0; k < traj.controls.size(); ++k) EXPECT_EQ(back.controls[k], traj.controls[k]);
  EXPECT_TRUE(same_bits(back.h, traj.h));
  EXPECT_TRUE(same_bits(back.params.u_max, traj.params.u_max));
  // Export of the import reproduces the text.
  EXPECT_EQ(io::to_json(back).dump(), text);
}

TEST(Json, MalformedTrajectoryRejected) {
  auto j = io::to_json(sample_trajectory());
  j["controls"].erase(0);
  EXPECT_THROW(io::trajectory_from_json(j), io::IoError);
  EXPECT_THROW(io::state_from_json(nlohmann::json::array({1, 2, 3})), io::IoError);
}

TEST(Hash, MatchesGitBlobIds) {
  // Oracle: `git hash-object --stdin`.
  EXPECT_EQ(io::git_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(io::git_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Svg, RenderIsDeterministic) {
  const auto traj = sample_trajectory();
  auto make = [&] {
    svg::Plot p("trajectory", "x", "y");
    std::vector<Point2> v;
    for (const auto& s : traj.states) v.push_back({s.x, s.y});
    p.equal_aspect().add({"path", svg::Style::Line, v});
    return p.render();
  };
  const std::string a = make(), b = make();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("viewBox=\"0 0 720.00 540.00\""), std::string::npos);
  EXPECT_EQ(a.substr(a.size() - 7), "</svg>\n");
}

TEST(Svg, EmptySeriesNamedInError) {
  svg::Plot p("t", "x", "y");
  EXPECT_THROW(p.render(), svg::PlotError);
  p.add({"reach boundary", svg::Style::Line, {}});
  try {
    p.render();
    FAIL();
  } catch (const svg::PlotError& e) {
    EXPECT_NE(std::string(e.what()).find("reach boundary"), std::string::npos);
  }
}

TEST(Svg, SinglePointSectionGivesOneMarker) {
  svg::Plot p("section", "x", "xdot");
  p.add({"crossing", svg::Style::Marker, {{0.9, 0.01}}});
  const std::string s = p.render();
  std::size_t n = 0;
  for (std::size_t at = s.find("<path"); at != std::string::npos; at = s.find("<path", at + 1)) ++n;
  EXPECT_EQ(n, 1u);
}

TEST(Svg, NonFiniteAndEscaping) {
  svg::Plot p("a<b", "x", "y");
  p.add({"s&t", svg::Style::Scatter, {{0.0, NAN}}});
  EXPECT_THROW(p.render(), svg::PlotError);
  EXPECT_EQ(svg::escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
}
