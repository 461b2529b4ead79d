// Scenario runner behind the command-line tool: executes one validated
// config, writes CSV/JSON/SVG outputs and returns a manifest.
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crtbp/config.hpp"
#include "crtbp/io.hpp"
#include "crtbp/reachability.hpp"
#include "crtbp/structures.hpp"
#include "crtbp/svg.hpp"

namespace crtbp {

/// A downstream solver failure, prefixed with the scenario it came from.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProducedFile {
  std::string name;
  std::string hash;  // git blob id
  std::size_t bytes = 0;
};

struct RunManifest {
  nlohmann::json config;
  std::string input_hash;
  std::vector<ProducedFile> files;
  nlohmann::json iterations = nlohmann::json::object();
  nlohmann::json summary = nlohmann::json::object();
  double wall_time = 0.0;
  int threads = 1;
  std::string manifest_hash;  // over everything except wall time and threads

  nlohmann::json hashed_part() const {
    nlohmann::json files_j = nlohmann::json::array();
    for (const auto& f : files) files_j.push_back({{"name", f.name}, {"hash", f.hash}, {"bytes", f.bytes}});
    return {{"config", config}, {"input_hash", input_hash}, {"files", files_j}, {"iterations", iterations},
            {"summary", summary}};
  }

  nlohmann::json to_json() const {
    auto j = hashed_part();
    j["manifest_hash"] = manifest_hash;
    j["wall_time_s"] = wall_time;
    j["threads"] = threads;
    return j;
  }
};

struct RunOptions {
  int threads = 1;
  bool verbose = false;
  std::ostream* log = &std::cerr;
};

namespace detail {

namespace fs = std::filesystem;
using nlohmann::json;

class OutputWriter {
 public:
  explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw io::IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    if (content.empty()) throw io::IoError("refusing to write empty output " + name);
    io::write_file(dir_ / name, content);
    files_.push_back({name, io::git_hash(content), content.size()});
  }
  void write(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  void write(const std::string& name, const io::Table& t) { write(name, t.str()); }
  void write(const std::string& name, const svg::Plot& p) { write(name, p.render()); }

  const std::vector<ProducedFile>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<ProducedFile> files_;
};

inline std::vector<Point2> xy(const DiscreteTrajectory& t) {
  std::vector<Point2> v;
  v.reserve(t.states.size());
  for (const auto& s : t.states) v.push_back({s.x, s.y});
  return v;
}

inline std::vector<Point2> jacobi_curve(const DiscreteTrajectory& t, bool relative) {
  std::vector<Point2> v;
  v.reserve(t.states.size());
  const double e0 = jacobi_integral(t.states.front(), t.params);
  for (std::size_t k = 0; k < t.states.size(); ++k)
    v.push_back({t.time(k), jacobi_integral(t.states[k], t.params) - (relative ? e0 : 0.0)});
  return v;
}

inline svg::Series primaries(const SystemParams& p) {
  const auto [e, m] = primary_positions(p);
  return {"primaries", svg::Style::Marker, {e, m}, "#444444", 4.0};
}

inline Point2 resolve_anchor(const SectionConfig& sc, const SystemParams& p) {
  if (sc.anchor == "custom") return sc.anchor_point;
  if (sc.anchor == "moon") return {1.0 - p.mu, 0.0};
  if (sc.anchor == "earth") return {-p.mu, 0.0};
  if (sc.anchor == "barycenter") return {0.0, 0.0};
  const LagrangePointSet lp = lagrange_points(p);
  return sc.anchor == "L2" ? lp[2] : lp[1];
}

inline json state_row(const StateVec& s) { return io::to_json(s); }

inline std::vector<double> thetas_of(const ReachConfig& r) {
  if (r.theta_deg.empty()) return theta_grid(static_cast<std::size_t>(r.n_theta));
  std::vector<double> t;
  for (double d : r.theta_deg) t.push_back(d * std::numbers::pi / 180.0);
  return t;
}

// ---------------------------------------------------------------- scenarios

inline void run_simulate(const RunConfig& cfg, OutputWriter& out, RunManifest& m) {
  const SimulateConfig& sc = *cfg.simulate;
  const SystemParams& p = cfg.system;
  const auto n = static_cast<std::size_t>(std::llround(sc.tf / p.h));
  if (n < 1) throw std::domain_error("simulate.tf is shorter than one step");
  const DiscreteTrajectory vi = propagate(sc.initial_state, n, p);
  const EnergyReport er = energy_report(vi);
  out.write("trajectory.csv", io::trajectory_table(vi));
  out.write("trajectory.json", io::to_json(vi));

  json drift = {{"steps", n},
                {"h", p.h},
                {"tf", vi.duration()},
                {"initial_energy", er.jacobi.front()},
                {"vi_max_abs_deviation", er.max_deviation},
                {"vi_mean_abs_deviation", er.mean_abs_deviation},
                {"vi_final_deviation", er.final_deviation},
                {"vi_drift_slope", er.drift_slope}};
  io::Table energy{{"t", "dE_vi"}, {}};
  svg::Plot eplot("Jacobi integral deviation", "t", "E(t) - E(0)");
  eplot.add({"variational", svg::Style::Line, jacobi_curve(vi, true), "#1f77b4", 1.5});
  svg::Plot tplot("Trajectory (rotating frame)", "x", "y");
  tplot.equal_aspect().add({"variational", svg::Style::Line, xy(vi), "#1f77b4", 1.2});
  if (sc.compare_rk4) {
    const DiscreteTrajectory rk = propagate_rk4(sc.initial_state, n, p);
    const EnergyReport rr = energy_report(rk);
    drift["rk4_max_abs_deviation"] = rr.max_deviation;
    drift["rk4_final_deviation"] = rr.final_deviation;
    drift["rk4_drift_slope"] = rr.drift_slope;
    drift["rk4_to_vi_ratio"] = er.max_deviation > 0.0 ? std::abs(rr.final_deviation) / er.max_deviation : INFINITY;
    energy.header.push_back("dE_rk4");
    for (std::size_t k = 0; k <= n; ++k)
      energy.rows.push_back({vi.time(k), er.jacobi[k] - er.jacobi[0], rr.jacobi[k] - rr.jacobi[0]});
    eplot.add({"rk4", svg::Style::Line, jacobi_curve(rk, true), "#d62728", 1.5});
    tplot.add({"rk4", svg::Style::Line, xy(rk), "#d62728", 0.8});
    out.write("trajectory_rk4.csv", io::trajectory_table(rk));
  } else {
    for (std::size_t k = 0; k <= n; ++k) energy.rows.push_back({vi.time(k), er.jacobi[k] - er.jacobi[0]});
  }
  tplot.add(primaries(p));
  out.write("energy.csv", energy);
  out.write("drift.json", drift);
  out.write("trajectory.svg", tplot);
  out.write("jacobi.svg", eplot);
  m.summary = drift;
}

inline void run_lagrange(const RunConfig& cfg, OutputWriter& out, RunManifest& m) {
  const SystemParams& p = cfg.system;
  const LagrangePointSet lp = lagrange_points(p);
  json pts = json::array();
  std::vector<Point2> v;
  double worst = 0.0;
  for (int i = 1; i <= 5; ++i) {
    const Point2& q = lp[i];
    const double g = grad_U(q.x, q.y, p.mu).norm();
    worst = std::max(worst, g);
    pts.push_back({{"name", "L" + std::to_string(i)},
                   {"x", q.x},
                   {"y", q.y},
                   {"grad_norm", g},
                   {"energy", jacobi_integral(StateVec{q.x, q.y, 0.0, 0.0}, p)}});
    v.push_back(q);
  }
  out.write("lagrange.json", json{{"mu", p.mu}, {"points", pts}});
  svg::Plot plot("Lagrange points", "x", "y");
  plot.equal_aspect().add({"lagrange points", svg::Style::Scatter, v, "#2ca02c", 4.0}).add(primaries(p));
  out.write("lagrange.svg", plot);
  m.summary = {{"max_grad_norm", worst}};
}

inline PeriodicOrbit correct_orbit(const RunConfig& cfg, RunManifest& m) {
  const OrbitConfig& oc = *cfg.orbit;
  OrbitCorrectorOptions opt;
  opt.tolerance = oc.tolerance;
  opt.max_iterations = oc.max_iterations;
  opt.collinear_point = oc.collinear_point;
  PeriodicOrbit orbit = find_periodic_orbit(cfg.system, OrbitTarget::initial_x(oc.x0, oc.vy_guess), opt);
  m.iterations["orbit_corrector"] = orbit.iterations;
  return orbit;
}

inline json orbit_json(const PeriodicOrbit& orbit, const MonodromyResult& mono) {
  json eig = json::array();
  for (const auto& e : mono.eigen) eig.push_back({e.value.real(), e.value.imag()});
  const auto& half = orbit.trajectory.states[orbit.half_steps];
  return {{"initial_state", io::to_json(orbit.initial)},
          {"period", orbit.period},
          {"step", orbit.step},
          {"half_steps", orbit.half_steps},
          {"energy", orbit.energy},
          {"iterations", orbit.iterations},
          {"half_period_vx", half.vx},
          {"half_period_y", half.y},
          {"closure_error", (orbit.trajectory.back().vec() - orbit.initial.vec()).norm()},
          {"monodromy_det", mono.determinant()},
          {"unstable_eigenvalue", mono.unstable_value},
          {"stable_eigenvalue", mono.stable_value},
          {"eigenvalues", eig}};
}

inline void run_orbit(const RunConfig& cfg, OutputWriter& out, RunManifest& m) {
  const PeriodicOrbit orbit = correct_orbit(cfg, m);
  const MonodromyResult mono = monodromy(orbit);
  const json desc = orbit_json(orbit, mono);
  out.write("orbit.json", desc);
  out.write("orbit.csv", io::trajectory_table(orbit.trajectory));
  svg::Plot tplot("Lyapunov orbit", "x", "y");
  tplot.equal_aspect().add({"orbit", svg::Style::Line, xy(orbit.trajectory), "#1f77b4", 1.5});
  const LagrangePointSet lp = lagrange_points(cfg.system);
  tplot.add({"L" + std::to_string(cfg.orbit->collinear_point), svg::Style::Marker,
             {lp[cfg.orbit->collinear_point]}, "#2ca02c", 4.0});
  out.write("trajectory.svg", tplot);
  svg::Plot eplot("Jacobi integral along the orbit", "t", "E(t) - E(0)");
  eplot.add({"orbit", svg::Style::Line, jacobi_curve(orbit.trajectory, true), "#1f77b4", 1.5});
  out.write("jacobi.svg", eplot);
  m.summary = desc;
}

inline void run_manifold(const RunConfig& cfg, OutputWriter& out, RunManifest& m) {
  const ManifoldConfig& mc = *cfg.manifold;
  const PeriodicOrbit orbit = correct_orbit(cfg, m);
  const MonodromyResult mono = monodromy(orbit);
  PoincareSection sec;
  sec.anchor = resolve_anchor(mc.section, cfg.system);
  sec.alpha = mc.section.alpha_deg * std::numbers::pi / 180.0;
  sec.half_line = mc.section.half_line;
  sec.direction = mc.section.direction;
  sec.validate();
  ManifoldOptions opt;
  opt.stability = mc.stable ? Stability::Stable : Stability::Unstable;
  opt.side = mc.positive_side ? Side::Positive : Side::Negative;
  opt.epsilon = mc.epsilon;
  opt.n_traj = static_cast<std::size_t>(mc.n_traj);
  opt.t_max = mc.t_max;
  opt.stop = sec;
  const ManifoldBranch br = globalize_manifold(orbit, opt);
  const auto crossings = br.crossings();

  io::Table tr{{"t", "x", "y", "vx", "vy", "branch"}, {}};
  svg::Plot tplot(std::string(mc.stable ? "Stable" : "Unstable") + " manifold branch", "x", "y");
  tplot.equal_aspect();
  for (std::size_t i = 0; i < br.trajectories.size(); ++i) {
    const auto& t = br.trajectories[i].trajectory;
    for (std::size_t k = 0; k < t.states.size(); ++k) {
      const auto& s = t.states[k];
      tr.rows.push_back({t.time(k), s.x, s.y, s.vx, s.vy, static_cast<double>(i)});
    }
    tplot.add({"branch " + std::to_string(i), svg::Style::Line, xy(t), "#9467bd", 0.8});
  }
  tplot.add({"orbit", svg::Style::Line, xy(orbit.trajectory), "#1f77b4", 1.5}).add(primaries(cfg.system));
  out.write("manifold_trajectories.csv", tr);
  out.write("crossings.csv", io::crossings_table(crossings));
  json desc = {{"orbit", orbit_json(orbit, mono)},
               {"stability", mc.stable ? "stable" : "unstable"},
               {"side", mc.positive_side ? "positive" : "negative"},
               {"epsilon", mc.epsilon},
               {"n_traj", mc.n_traj},
               {"section", {{"anchor", io::to_json(sec.anchor)}, {"alpha", sec.alpha}, {"half_line", sec.half_line}}},
               {"crossings", crossings.size()}};
  desc["mean_time_of_flight"] = crossings.empty() ? json(nullptr) : json(br.mean_time_of_flight());
  out.write("manifold.json", desc);
  out.write("trajectory.svg", tplot);
  if (!crossings.empty()) {
    std::vector<Point2> pts;
    for (const auto& c : crossings) pts.push_back(c.coords);
    svg::Plot splot("Section crossings", "x", "xdot");
    splot.add({"crossings", svg::Style::Scatter, pts, "#9467bd", 3.0});
    out.write("section.svg", splot);
  }
  svg::Plot eplot("Jacobi integral along the branch", "t", "E(t)");
  for (std::size_t i = 0; i < br.trajectories.size(); ++i)
    eplot.add({"branch " + std::to_string(i), svg::Style::Line, jacobi_curve(br.trajectories[i].trajectory, false),
               "#9467bd", 0.8});
  out.write("jacobi.svg", eplot);
  m.summary = {{"crossings", crossings.size()}, {"mean_time_of_flight", desc["mean_time_of_flight"]}};
}

inline ReachProblem reach_problem(const RunConfig& cfg) {
  const ReachConfig& rc = *cfg.reach;
  return make_reach_problem(cfg.system, rc.initial_state, rc.tf, rc.alpha_deg * std::numbers::pi / 180.0,
                            rc.snap_horizon);
}

inline ReachOptions reach_options(const RunConfig& cfg, const RunOptions& ro) {
  const ReachConfig& rc = *cfg.reach;
  ReachOptions opt;
  opt.shooting.n_arcs = rc.n_arcs;
  opt.shooting.tolerance = rc.tolerance;
  opt.shooting.max_iterations = rc.max_iterations;
  opt.continuation = rc.continuation;
  opt.threads = ro.threads;
  return opt;
}

inline json reach_json(const ReachProblem& pb, const ReachableSet& rs) {
  json pts = json::array();
  for (const auto& q : rs.points) {
    json j = {{"theta", q.theta}, {"converged", q.converged}, {"residual", q.residual}, {"iterations", q.iterations}};
    if (q.converged) {
      j["point"] = io::to_json(q.point);
      j["defect"] = q.solution->defect;
      j["terminal_residual"] = q.solution->terminal_residual;
      j["transversality"] = q.solution->transversality;
      j["beta"] = {q.solution->beta[0], q.solution->beta[1]};
    } else {
      j["message"] = q.message;
    }
    pts.push_back(j);
  }
  json j = {{"u_max", rs.u_max},
            {"N", pb.N},
            {"h", pb.params.h},
            {"horizon", pb.horizon()},
            {"control_free", io::to_json(rs.control_free)},
            {"reference_terminal", io::to_json(pb.reference_terminal())},
            {"converged", rs.converged_count()},
            {"converged_fraction", rs.converged_fraction()},
            {"points", pts}};
  const auto poly = rs.polygon();
  if (poly.size() >= 3 && geom::area(poly) > 0.0) {
    const auto e = geom::fit_ellipse(poly);
    j["polygon"] = {{"simple", geom::is_simple(poly)},
                    {"area", geom::area(poly)},
                    {"encloses_control_free", geom::strictly_contains(poly, rs.control_free)},
                    {"ellipse",
                     {{"center", io::to_json(e.center)},
                      {"major", e.major},
                      {"minor", e.minor},
                      {"angle_deg", e.angle * 180.0 / std::numbers::pi}}}};
  } else {
    j["polygon"] = nullptr;
  }
  return j;
}

inline io::Table reach_table(const ReachableSet& rs) {
  io::Table t{{"theta_deg", "x", "xdot", "converged"}, {}};
  for (const auto& q : rs.points)
    t.rows.push_back({q.theta * 180.0 / std::numbers::pi, q.converged ? q.point.x : NAN,
                      q.converged ? q.point.y : NAN, q.converged ? 1.0 : 0.0});
  return t;
}

inline std::vector<Point2> closed(std::vector<Point2> v) {
  if (!v.empty()) v.push_back(v.front());
  return v;
}

inline ReachableSet sweep(const RunConfig& cfg, const RunOptions& ro, const ReachProblem& pb, RunManifest& m) {
  const ReachableSet rs = reachable_set(pb, thetas_of(*cfg.reach), reach_options(cfg, ro));
  json its = json::array();
  for (const auto& q : rs.points) its.push_back(q.iterations);
  m.iterations["reach_newton"] = its;
  if (ro.verbose)
    *ro.log << "reach: " << rs.converged_count() << "/" << rs.points.size() << " angles converged\n";
  return rs;
}

inline void write_reach(const ReachProblem& pb, const ReachableSet& rs, OutputWriter& out) {
  out.write("reach.csv", reach_table(rs));
  out.write("reach.json", reach_json(pb, rs));
}

inline void run_reach(const RunConfig& cfg, const RunOptions& ro, OutputWriter& out, RunManifest& m) {
  const ReachProblem pb = reach_problem(cfg);
  const ReachableSet rs = sweep(cfg, ro, pb, m);
  write_reach(pb, rs, out);

  svg::Plot splot("Reachable set on the section", "x", "xdot");
  const auto poly = rs.polygon();
  if (poly.size() >= 2) splot.add({"reach boundary", svg::Style::Outline, poly, "#1f77b4", 1.5});
  splot.add({"reach points", svg::Style::Scatter, poly, "#1f77b4", 3.0});
  splot.add({"control-free", svg::Style::Marker, {rs.control_free}, "#d62728", 5.0});
  out.write("section.svg", splot);

  svg::Plot tplot("Extremal trajectories", "x", "y");
  tplot.equal_aspect().add({"control-free", svg::Style::Line, xy(pb.reference), "#d62728", 1.5});
  svg::Plot eplot("Jacobi integral along extremals", "t", "E(t)");
  eplot.add({"control-free", svg::Style::Line, jacobi_curve(pb.reference, false), "#d62728", 1.5});
  for (const auto& q : rs.points) {
    if (!q.converged) continue;
    const std::string name = "theta " + svg::num(q.theta * 180.0 / std::numbers::pi, 4);
    tplot.add({name, svg::Style::Line, xy(q.solution->trajectory), "#1f77b4", 0.6});
    eplot.add({name, svg::Style::Line, jacobi_curve(q.solution->trajectory, false), "#1f77b4", 0.6});
  }
  out.write("trajectory.svg", tplot);
  out.write("jacobi.svg", eplot);
  m.summary = reach_json(pb, rs);
  m.summary.erase("points");
}

inline void run_transfer(const RunConfig& cfg, const RunOptions& ro, OutputWriter& out, RunManifest& m) {
  const TransferConfig& tc = *cfg.transfer;
  const ReachProblem pb = reach_problem(cfg);
  const ReachableSet rs = sweep(cfg, ro, pb, m);
  write_reach(pb, rs, out);

  PoincareSection tsec = pb.section;
  tsec.half_line = true;
  tsec.direction = CrossingDirection::Both;
  const TargetRegion region = target_orbit_region(cfg.system, tc.target_state, tc.target_span, tsec);
  const auto& cluster = tc.descending ? region.descending : region.ascending;
  out.write("target_crossings.csv", io::crossings_table(region.crossings));
  if (ro.verbose)
    *ro.log << "transfer: target region has " << region.ascending.size() << " ascending and "
            << region.descending.size() << " descending crossings\n";

  TransferOptions topt;
  topt.shooting.n_arcs = cfg.reach->n_arcs;
  topt.shooting.max_iterations = cfg.reach->max_iterations;
  topt.max_candidates = static_cast<std::size_t>(tc.max_candidates);
  const TransferDesign d = design_transfer(pb, rs, cluster, region.energy, topt);
  m.iterations["transfer_newton"] = d.solution.iterations;

  out.write("transfer.csv", io::trajectory_table(d.solution.trajectory));
  double max_u = 0.0, impulse = 0.0;
  json thrust = json::array();
  for (const auto& u : d.solution.trajectory.controls) {
    max_u = std::max(max_u, u.norm());
    impulse += u.norm() * d.solution.trajectory.h;
    thrust.push_back(u.norm());
  }
  json attempts = json::array();
  for (const auto& a : d.attempts)
    attempts.push_back({{"section_point", io::to_json(a.section_point)},
                        {"boundary_intersection", a.boundary},
                        {"result", a.message.empty() ? "ok" : a.message}});
  json inter = json::array();
  for (const auto& q : d.intersections) inter.push_back(io::to_json(q));
  const json summary = {{"time_of_flight", d.time_of_flight},
                        {"terminal_error", d.terminal_error},
                        {"section_point", io::to_json(d.section_point)},
                        {"target_state", io::to_json(d.target)},
                        {"target_energy", d.target_energy},
                        {"intersections", inter},
                        {"attempts", attempts},
                        {"max_thrust", max_u},
                        {"delta_v", impulse},
                        {"newton_iterations", d.solution.iterations},
                        {"residual", d.solution.residual}};
  json tj = summary;
  tj["thrust_profile"] = thrust;
  tj["trajectory"] = io::to_json(d.solution.trajectory);
  out.write("transfer.json", tj);

  svg::Plot splot("Section: reachable set and target region", "x", "xdot");
  splot.add({"reach boundary", svg::Style::Outline, d.reach_polygon, "#1f77b4", 1.5});
  splot.add({"reach points", svg::Style::Scatter, d.reach_polygon, "#1f77b4", 3.0});
  if (!region.descending.empty()) {
    std::vector<Point2> v;
    for (const auto& c : region.descending) v.push_back(c.coords);
    splot.add({"target (descending)", svg::Style::Scatter, v, "#ff7f0e", 2.0});
  }
  if (!region.ascending.empty()) {
    std::vector<Point2> v;
    for (const auto& c : region.ascending) v.push_back(c.coords);
    splot.add({"target (ascending)", svg::Style::Scatter, v, "#bcbd22", 2.0});
  }
  if (!d.intersections.empty())
    splot.add({"boundary intersections", svg::Style::Marker, d.intersections, "#7f7f7f", 4.0});
  splot.add({"design point", svg::Style::Marker, {d.section_point}, "#d62728", 6.0});
  splot.add({"control-free", svg::Style::Marker, {rs.control_free}, "#2ca02c", 4.0});
  out.write("section.svg", splot);

  svg::Plot tplot("Transfer trajectory", "x", "y");
  tplot.equal_aspect()
      .add({"target orbit", svg::Style::Line, xy(region.trajectory), "#ff7f0e", 0.6})
      .add({"control-free", svg::Style::Line, xy(pb.reference), "#2ca02c", 1.0})
      .add({"transfer", svg::Style::Line, xy(d.solution.trajectory), "#d62728", 1.8})
      .add(primaries(cfg.system));
  out.write("trajectory.svg", tplot);
  svg::Plot eplot("Jacobi integral along the transfer", "t", "E(t)");
  eplot.add({"transfer", svg::Style::Line, jacobi_curve(d.solution.trajectory, false), "#d62728", 1.5});
  out.write("jacobi.svg", eplot);
  m.summary = summary;
}

}  // namespace detail

/// Executes one scenario. Solver failures come back as SolverError with the
/// scenario name prefixed; I/O problems as io::IoError.
inline RunManifest run(const RunConfig& cfg, const std::filesystem::path& out_dir, const RunOptions& ro = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.config = config_to_json(cfg);
  m.input_hash = io::git_hash(m.config.dump());
  m.threads = ro.threads;
  detail::OutputWriter out(out_dir);
  if (ro.verbose) *ro.log << "running " << to_string(cfg.scenario) << " into " << out_dir.string() << "\n";
  out.write("config.json", m.config);
  try {
    switch (cfg.scenario) {
      case Scenario::Simulate: detail::run_simulate(cfg, out, m); break;
      case Scenario::Lagrange: detail::run_lagrange(cfg, out, m); break;
      case Scenario::Orbit: detail::run_orbit(cfg, out, m); break;
      case Scenario::Manifold: detail::run_manifold(cfg, out, m); break;
      case Scenario::Reach: detail::run_reach(cfg, ro, out, m); break;
      case Scenario::Transfer: detail::run_transfer(cfg, ro, out, m); break;
    }
  } catch (const io::IoError&) {
    throw;
  } catch (const svg::PlotError&) {
    throw;
  } catch (const std::exception& e) {
    throw SolverError(to_string(cfg.scenario) + ": " + e.what());
  }
  m.files = out.files();
  m.manifest_hash = io::git_hash(m.hashed_part().dump());
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_file(out.dir() / "manifest.json", m.to_json().dump(2) + "\n");
  if (ro.verbose) *ro.log << "done in " << m.wall_time << " s, manifest " << m.manifest_hash << "\n";
  return m;
}

}  // namespace crtbp
