// CSV and JSON persistence. Doubles are written in shortest round-trip form,
// so export -> import reproduces every value bit for bit.
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "crtbp/integrator.hpp"
#include "crtbp/section.hpp"

namespace crtbp::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw IoError("cannot format double");
  return {buf, res.ptr};
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("bad number '" + std::string(s) + "'");
  return v;
}

/// Fixed-column CSV table; header first, one row per record.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += '\n';
    for (const auto& r : rows) {
      if (r.size() != header.size()) throw IoError("csv row width does not match header");
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) out += ',';
        out += fmt(r[i]);
      }
      out += '\n';
    }
    return out;
  }

  static Table parse(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty csv");
    auto split = [](const std::string& l) {
      std::vector<std::string> f;
      std::string cur;
      for (char c : l) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else if (c != '\r') {
          cur += c;
        }
      }
      f.push_back(cur);
      return f;
    };
    t.header = split(line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      for (const auto& f : split(line)) row.push_back(parse_double(f));
      if (row.size() != t.header.size()) throw IoError("csv row width does not match header");
      t.rows.push_back(std::move(row));
    }
    return t;
  }
};

inline const std::vector<std::string> kTrajectoryColumns{"t", "x", "y", "vx", "vy", "ux", "uy"};

/// Columns t,x,y,vx,vy,ux,uy. The last row repeats no control (zeros).
inline Table trajectory_table(const DiscreteTrajectory& traj) {
  Table t{kTrajectoryColumns, {}};
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& s = traj.states[k];
    const ControlVec u = k < traj.controls.size() ? traj.controls[k] : ControlVec{};
    t.rows.push_back({traj.time(k), s.x, s.y, s.vx, s.vy, u.ux, u.uy});
  }
  return t;
}

inline json to_json(const StateVec& s) { return json::array({s.x, s.y, s.vx, s.vy}); }
inline json to_json(const Point2& p) { return json::array({p.x, p.y}); }

inline StateVec state_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw IoError("state must be an array of four numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline json to_json(const SystemParams& p) { return {{"mu", p.mu}, {"h", p.h}, {"u_max", p.u_max}}; }

inline json to_json(const DiscreteTrajectory& traj) {
  json states = json::array(), controls = json::array();
  for (const auto& s : traj.states) states.push_back(to_json(s));
  for (const auto& u : traj.controls) controls.push_back(json::array({u.ux, u.uy}));
  return {{"h", traj.h}, {"params", to_json(traj.params)}, {"states", states}, {"controls", controls}};
}

inline DiscreteTrajectory trajectory_from_json(const json& j) {
  DiscreteTrajectory t;
  t.h = j.at("h").get<double>();
  const auto& p = j.at("params");
  t.params = {p.at("mu").get<double>(), p.at("h").get<double>(), p.at("u_max").get<double>()};
  for (const auto& s : j.at("states")) t.states.push_back(state_from_json(s));
  for (const auto& u : j.at("controls")) t.controls.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
  if (t.controls.size() + 1 != t.states.size()) throw IoError("trajectory needs one control per step");
  return t;
}

/// Columns t,x,y,vx,vy,branch.
inline Table crossings_table(const std::vector<SectionCrossing>& cs) {
  Table t{{"t", "x", "y", "vx", "vy", "branch"}, {}};
  for (const auto& c : cs)
    t.rows.push_back({c.t, c.state.x, c.state.y, c.state.vx, c.state.vy, static_cast<double>(c.trajectory_id)});
  return t;
}

/// Git blob object id (SHA-1 of "blob <size>\0" + content).
inline std::string git_hash(const std::string& content) {
  const std::string obj = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(obj.data(), obj.size(), md, &len, EVP_sha1(), nullptr) != 1) throw IoError("sha1 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace crtbp::io
