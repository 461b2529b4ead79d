// Run configuration: JSON text -> validated RunConfig. Unknown keys are
// rejected; every error names the offending field path. Defaults live in
// one place (the member initializers below) and are listed in the README.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crtbp/dynamics.hpp"
#include "crtbp/section.hpp"

namespace crtbp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario { Simulate, Lagrange, Orbit, Manifold, Reach, Transfer };

inline const std::vector<std::pair<std::string, Scenario>>& scenario_names() {
  static const std::vector<std::pair<std::string, Scenario>> names{
      {"simulate", Scenario::Simulate}, {"lagrange", Scenario::Lagrange}, {"orbit", Scenario::Orbit},
      {"manifold", Scenario::Manifold}, {"reach", Scenario::Reach},       {"transfer", Scenario::Transfer}};
  return names;
}

inline std::string to_string(Scenario s) {
  for (const auto& [n, v] : scenario_names())
    if (v == s) return n;
  return "?";
}

inline Scenario parse_scenario(const std::string& name) {
  for (const auto& [n, v] : scenario_names())
    if (n == name) return v;
  throw ConfigError("scenario: unknown scenario '" + name +
                    "' (expected simulate, lagrange, orbit, manifold, reach or transfer)");
}

struct SimulateConfig {
  StateVec initial_state;  // required
  double tf = 0.0;         // required
  bool compare_rk4 = true;
};

struct OrbitConfig {
  double x0 = 0.0;  // required
  std::optional<double> vy_guess;
  int collinear_point = 1;
  double tolerance = 1e-12;
  int max_iterations = 30;
};

struct SectionConfig {
  std::string anchor = "L1";  // L1, L2, moon, earth, barycenter, or custom
  Point2 anchor_point;        // resolved later for named anchors
  double alpha_deg = 0.0;
  bool half_line = false;
  CrossingDirection direction = CrossingDirection::Both;
};

struct ManifoldConfig {
  bool stable = false;
  bool positive_side = true;
  double epsilon = 1e-6;
  int n_traj = 20;
  double t_max = 10.0;
  SectionConfig section{"moon", {}, 0.0, true, CrossingDirection::Both};
};

struct ReachConfig {
  StateVec initial_state;  // required
  double tf = 0.0;         // required
  double alpha_deg = 0.0;
  std::vector<double> theta_deg;  // default: n_theta equally spaced angles
  int n_theta = 24;
  int n_arcs = 4;
  bool continuation = true;
  bool snap_horizon = true;
  double tolerance = 1e-8;
  int max_iterations = 30;
};

struct TransferConfig {
  StateVec target_state;  // required
  double target_span = 20.0;
  bool descending = true;
  int max_candidates = 6;
};

struct RunConfig {
  Scenario scenario = Scenario::Simulate;
  SystemParams system;
  std::optional<SimulateConfig> simulate;
  std::optional<OrbitConfig> orbit;
  std::optional<ManifoldConfig> manifold;
  std::optional<ReachConfig> reach;
  std::optional<TransferConfig> transfer;
  std::uint64_t seed = 0;
  std::optional<std::string> output_dir;
};

namespace detail {

using nlohmann::json;

/// Field reader for one JSON object; remembers which keys were consumed so
/// the rest can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> def, double lo = -INFINITY, double hi = INFINITY,
                bool lo_open = false) {
    if (!has(key)) {
      if (def) return *def;
      throw ConfigError(path(key) + ": required field is missing");
    }
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path(key) + ": must be finite");
    if (d < lo || d > hi || (lo_open && d == lo))
      throw ConfigError(path(key) + ": value " + v.dump() + " outside " + (lo_open ? "(" : "[") + fmt(lo) + ", " +
                        fmt(hi) + "]");
    return d;
  }

  int integer(const std::string& key, int def, int lo, int hi) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
    const auto i = v.get<long long>();
    if (i < lo || i > hi)
      throw ConfigError(path(key) + ": value " + v.dump() + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    return static_cast<int>(i);
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string choice(const std::string& key, const std::string& def, const std::vector<std::string>& allowed) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    const auto s = v.get<std::string>();
    for (const auto& a : allowed)
      if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError(path(key) + ": '" + s + "' is not one of " + list);
  }

  StateVec state(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key) + ": required field is missing");
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 4) throw ConfigError(path(key) + ": expected [x, y, vx, vy]");
    double c[4];
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]: expected a finite number");
      c[i] = v[i].get<double>();
    }
    return {c[0], c[1], c[2], c[3]};
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  static std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return json(v).dump();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline SectionConfig read_section(Fields& parent, const std::string& key, SectionConfig sc) {
  if (!parent.has(key)) return sc;
  Fields f(parent.raw(key), parent.path(key));
  if (f.has("anchor")) {
    const json& a = f.raw("anchor");
    if (a.is_string()) {
      sc.anchor = a.get<std::string>();
      if (sc.anchor != "L1" && sc.anchor != "L2" && sc.anchor != "moon" && sc.anchor != "earth" &&
          sc.anchor != "barycenter")
        throw ConfigError(f.path("anchor") + ": '" + sc.anchor + "' is not one of L1, L2, moon, earth, barycenter");
    } else if (a.is_array() && a.size() == 2 && a[0].is_number() && a[1].is_number()) {
      sc.anchor = "custom";
      sc.anchor_point = {a[0].get<double>(), a[1].get<double>()};
    } else {
      throw ConfigError(f.path("anchor") + ": expected a named anchor or [x, y]");
    }
  }
  sc.alpha_deg = f.number("alpha_deg", sc.alpha_deg, 0.0, 360.0);
  if (sc.alpha_deg == 360.0) throw ConfigError(f.path("alpha_deg") + ": must be below 360");
  sc.half_line = f.boolean("half_line", sc.half_line);
  const auto dir = f.choice("direction", "both", {"both", "ascending", "descending"});
  sc.direction = dir == "ascending" ? CrossingDirection::Ascending
                 : dir == "descending" ? CrossingDirection::Descending
                                       : CrossingDirection::Both;
  f.finish();
  return sc;
}

inline std::string required_fields(std::optional<Scenario> s) {
  std::string base = "scenario (or the CLI argument)";
  if (!s) return base + ", plus the block of the chosen scenario";
  switch (*s) {
    case Scenario::Simulate: return base + ", simulate.initial_state, simulate.tf";
    case Scenario::Lagrange: return base;
    case Scenario::Orbit: return base + ", orbit.x0";
    case Scenario::Manifold: return base + ", orbit.x0 (manifold block optional)";
    case Scenario::Reach: return base + ", system.u_max, reach.initial_state, reach.tf";
    case Scenario::Transfer:
      return base + ", system.u_max, reach.initial_state, reach.tf, transfer.target_state";
  }
  return base;
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses and range-checks a JSON config. `cli_scenario`, when given, must
/// agree with a "scenario" key in the file if both are present.
inline RunConfig validate_config(const std::string& text, std::optional<Scenario> cli_scenario = std::nullopt) {
  using detail::Fields;
  using nlohmann::json;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ConfigError("config is empty; required fields: " + detail::required_fields(cli_scenario));
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                      e.what());
  }
  Fields root(j, "");
  RunConfig cfg;

  if (root.has("scenario")) {
    const json& s = root.raw("scenario");
    if (!s.is_string()) throw ConfigError("scenario: expected a string");
    cfg.scenario = parse_scenario(s.get<std::string>());
    if (cli_scenario && *cli_scenario != cfg.scenario)
      throw ConfigError("scenario: file says '" + to_string(cfg.scenario) + "' but the command line says '" +
                        to_string(*cli_scenario) + "'");
  } else if (cli_scenario) {
    cfg.scenario = *cli_scenario;
  } else {
    throw ConfigError("scenario: required field is missing");
  }
  const Scenario sc = cfg.scenario;

  if (root.has("system")) {
    Fields f(root.raw("system"), "system");
    cfg.system.mu = f.number("mu", cfg.system.mu, 0.0, 0.5);
    cfg.system.h = f.number("h", cfg.system.h, 0.0, 1.0, true);
    const bool needs_thrust = sc == Scenario::Reach || sc == Scenario::Transfer;
    cfg.system.u_max = f.number("u_max", needs_thrust ? std::nullopt : std::optional<double>(0.0), 0.0, 100.0);
    f.finish();
  } else if (sc == Scenario::Reach || sc == Scenario::Transfer) {
    throw ConfigError("system.u_max: required field is missing");
  }
  if ((sc == Scenario::Lagrange || sc == Scenario::Orbit || sc == Scenario::Manifold || sc == Scenario::Reach ||
       sc == Scenario::Transfer) &&
      !(cfg.system.mu > 0.0))
    throw ConfigError("system.mu: must be positive for this scenario");

  if (root.has("simulate") || sc == Scenario::Simulate) {
    if (!root.has("simulate")) throw ConfigError("simulate: required block is missing");
    Fields f(root.raw("simulate"), "simulate");
    SimulateConfig s;
    s.initial_state = f.state("initial_state");
    s.tf = f.number("tf", std::nullopt, 0.0, 1e6, true);
    s.compare_rk4 = f.boolean("compare_rk4", s.compare_rk4);
    f.finish();
    cfg.simulate = s;
  }

  if (root.has("orbit") || sc == Scenario::Orbit || sc == Scenario::Manifold) {
    if (!root.has("orbit")) throw ConfigError("orbit: required block is missing");
    Fields f(root.raw("orbit"), "orbit");
    OrbitConfig o;
    o.x0 = f.number("x0", std::nullopt);
    if (f.has("vy_guess")) o.vy_guess = f.number("vy_guess", std::nullopt);
    o.collinear_point = f.integer("collinear_point", o.collinear_point, 1, 2);
    o.tolerance = f.number("tolerance", o.tolerance, 0.0, 1e-3, true);
    o.max_iterations = f.integer("max_iterations", o.max_iterations, 1, 1000);
    f.finish();
    cfg.orbit = o;
  }

  if (root.has("manifold") || sc == Scenario::Manifold) {
    ManifoldConfig m;
    if (root.has("manifold")) {
      Fields f(root.raw("manifold"), "manifold");
      m.stable = f.choice("stability", "unstable", {"stable", "unstable"}) == "stable";
      m.positive_side = f.choice("side", "positive", {"positive", "negative"}) == "positive";
      m.epsilon = f.number("epsilon", m.epsilon, 0.0, 0.1, true);
      m.n_traj = f.integer("n_traj", m.n_traj, 1, 100000);
      m.t_max = f.number("t_max", m.t_max, 0.0, 1e4, true);
      m.section = detail::read_section(f, "section", m.section);
      f.finish();
    }
    cfg.manifold = m;
  }

  if (root.has("reach") || sc == Scenario::Reach || sc == Scenario::Transfer) {
    if (!root.has("reach")) throw ConfigError("reach: required block is missing");
    Fields f(root.raw("reach"), "reach");
    ReachConfig r;
    r.initial_state = f.state("initial_state");
    r.tf = f.number("tf", std::nullopt, 0.0, 1e4, true);
    r.alpha_deg = f.number("alpha_deg", r.alpha_deg, 0.0, 360.0);
    if (r.alpha_deg == 360.0) throw ConfigError("reach.alpha_deg: must be below 360");
    r.n_theta = f.integer("n_theta", r.n_theta, 1, 100000);
    if (f.has("theta_deg")) {
      const json& t = f.raw("theta_deg");
      if (!t.is_array() || t.empty()) throw ConfigError("reach.theta_deg: expected a nonempty array of numbers");
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_number() || !std::isfinite(t[i].get<double>()))
          throw ConfigError("reach.theta_deg[" + std::to_string(i) + "]: expected a finite number");
        r.theta_deg.push_back(t[i].get<double>());
      }
    }
    r.n_arcs = f.integer("n_arcs", r.n_arcs, 1, 1000);
    r.continuation = f.boolean("continuation", r.continuation);
    r.snap_horizon = f.boolean("snap_horizon", r.snap_horizon);
    r.tolerance = f.number("tolerance", r.tolerance, 0.0, 1e-2, true);
    r.max_iterations = f.integer("max_iterations", r.max_iterations, 1, 1000);
    f.finish();
    cfg.reach = r;
  }

  if (root.has("transfer") || sc == Scenario::Transfer) {
    if (!root.has("transfer")) throw ConfigError("transfer: required block is missing");
    Fields f(root.raw("transfer"), "transfer");
    TransferConfig t;
    t.target_state = f.state("target_state");
    t.target_span = f.number("target_span", t.target_span, 0.0, 1e4, true);
    t.descending = f.choice("cluster", "descending", {"ascending", "descending"}) == "descending";
    t.max_candidates = f.integer("max_candidates", t.max_candidates, 1, 1000);
    f.finish();
    cfg.transfer = t;
  }

  if (root.has("seed")) {
    const json& s = root.raw("seed");
    if (!s.is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (root.has("output_dir")) {
    const json& o = root.raw("output_dir");
    if (!o.is_string() || o.get<std::string>().empty()) throw ConfigError("output_dir: expected a nonempty string");
    cfg.output_dir = o.get<std::string>();
  }
  root.finish();
  return cfg;
}

/// Canonical JSON echo of a validated config (defaults filled in).
inline nlohmann::json config_to_json(const RunConfig& c) {
  using nlohmann::json;
  auto st = [](const StateVec& s) { return json::array({s.x, s.y, s.vx, s.vy}); };
  auto dir = [](CrossingDirection d) {
    return d == CrossingDirection::Ascending ? "ascending" : d == CrossingDirection::Descending ? "descending" : "both";
  };
  json j;
  j["scenario"] = to_string(c.scenario);
  j["system"] = {{"mu", c.system.mu}, {"h", c.system.h}, {"u_max", c.system.u_max}};
  if (c.simulate)
    j["simulate"] = {{"initial_state", st(c.simulate->initial_state)}, {"tf", c.simulate->tf},
                     {"compare_rk4", c.simulate->compare_rk4}};
  if (c.orbit) {
    j["orbit"] = {{"x0", c.orbit->x0}, {"collinear_point", c.orbit->collinear_point},
                  {"tolerance", c.orbit->tolerance}, {"max_iterations", c.orbit->max_iterations}};
    if (c.orbit->vy_guess) j["orbit"]["vy_guess"] = *c.orbit->vy_guess;
  }
  if (c.manifold) {
    const auto& m = *c.manifold;
    json sec = {{"alpha_deg", m.section.alpha_deg}, {"half_line", m.section.half_line},
                {"direction", dir(m.section.direction)}};
    if (m.section.anchor == "custom")
      sec["anchor"] = json::array({m.section.anchor_point.x, m.section.anchor_point.y});
    else
      sec["anchor"] = m.section.anchor;
    j["manifold"] = {{"stability", m.stable ? "stable" : "unstable"}, {"side", m.positive_side ? "positive" : "negative"},
                     {"epsilon", m.epsilon}, {"n_traj", m.n_traj}, {"t_max", m.t_max}, {"section", sec}};
  }
  if (c.reach) {
    const auto& r = *c.reach;
    j["reach"] = {{"initial_state", st(r.initial_state)}, {"tf", r.tf}, {"alpha_deg", r.alpha_deg},
                  {"n_theta", r.n_theta}, {"n_arcs", r.n_arcs}, {"continuation", r.continuation},
                  {"snap_horizon", r.snap_horizon}, {"tolerance", r.tolerance}, {"max_iterations", r.max_iterations}};
    if (!r.theta_deg.empty()) j["reach"]["theta_deg"] = r.theta_deg;
  }
  if (c.transfer)
    j["transfer"] = {{"target_state", st(c.transfer->target_state)}, {"target_span", c.transfer->target_span},
                     {"cluster", c.transfer->descending ? "descending" : "ascending"},
                     {"max_candidates", c.transfer->max_candidates}};
  j["seed"] = c.seed;
  if (c.output_dir) j["output_dir"] = *c.output_dir;
  return j;
}

}  // namespace crtbp
