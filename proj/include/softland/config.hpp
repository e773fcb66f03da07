#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "softland/errors.hpp"
#include "softland/ocp.hpp"

namespace softland {

// INI-style configuration files, one per parameter table: `key = value` lines,
// optional `[section]` headers, '#'/';' comments. Keys mirror the model and
// optimization parameter symbols. Parsing is strict: unknown keys, duplicate
// keys and missing required keys are all ConfigError.

namespace detail {

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<IniEntry> parse_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::vector<IniEntry> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    IniEntry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty() || e.value.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");
    out.push_back(std::move(e));
  }
  return out;
}

inline double config_number(const IniEntry& e, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (trim(e.value.substr(pos)).empty() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(path + ":" + std::to_string(e.line) + ": value of '" + e.key +
                    "' is not a finite number: '" + e.value + "'");
}

// Collapse entries into a key -> value map while enforcing the schema.
inline std::map<std::string, double> read_schema(const std::string& path,
                                                 const std::string& expected_section,
                                                 const std::set<std::string>& required,
                                                 const std::set<std::string>& optional) {
  std::map<std::string, double> out;
  for (const IniEntry& e : parse_ini(path)) {
    if (!e.section.empty() && e.section != expected_section)
      throw ConfigError(path + ":" + std::to_string(e.line) + ": unknown section '[" + e.section +
                        "]', expected '[" + expected_section + "]'");
    if (!required.count(e.key) && !optional.count(e.key))
      throw ConfigError(path + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    if (out.count(e.key))
      throw ConfigError(path + ":" + std::to_string(e.line) + ": duplicate key '" + e.key + "'");
    out[e.key] = config_number(e, path);
  }
  for (const std::string& k : required)
    if (!out.count(k)) throw ConfigError(path + ": missing required key '" + k + "'");
  return out;
}

}  // namespace detail

// Actuator table: R, N, m, k_s, z_s, c_f, k_1, k_2, k_ec, z_min, z_max, plus
// the gap reluctance slope of the default linear R_g(z) family.
inline ActuatorParams load_actuator_config(const std::string& path) {
  const auto kv = detail::read_schema(
      path, "actuator",
      {"R", "N", "m", "k_s", "z_s", "c_f", "k_1", "k_2", "k_ec", "z_min", "z_max"},
      {"gap_slope"});
  ActuatorParams p;
  p.R = kv.at("R");
  p.N = kv.at("N");
  p.m = kv.at("m");
  p.k_s = kv.at("k_s");
  p.z_s = kv.at("z_s");
  p.c_f = kv.at("c_f");
  p.k_ec = kv.at("k_ec");
  p.z_min = kv.at("z_min");
  p.z_max = kv.at("z_max");
  const double slope = kv.count("gap_slope")
                           ? kv.at("gap_slope")
                           : ActuatorParams::reference_valve().reluctance.gap_slope();
  try {
    p.reluctance = ReluctanceFamily::saturable(kv.at("k_1"), kv.at("k_2"), slope);
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return p;
}

// Optimization table: voltage bounds, boundary conditions, horizon, contact
// distribution (sigma_z2 is the variance, as tabulated) and cost weights.
struct OptimizationConfig {
  double u_minus = 0.0, u_plus = 0.0;
  double z_0 = 0.0, z_f = 0.0, t_f = 0.0;
  double mu_z = 0.0, sigma_z2 = 0.0;
  double w1 = 0.0, w2 = 0.0, w3 = 0.0;
};

inline OptimizationConfig load_optimization_config(const std::string& path) {
  const auto kv = detail::read_schema(
      path, "optimization",
      {"u_minus", "u_plus", "z_0", "z_f", "t_f", "mu_z", "sigma_z2", "w1", "w2", "w3"}, {});
  OptimizationConfig c;
  c.u_minus = kv.at("u_minus");
  c.u_plus = kv.at("u_plus");
  c.z_0 = kv.at("z_0");
  c.z_f = kv.at("z_f");
  c.t_f = kv.at("t_f");
  c.mu_z = kv.at("mu_z");
  c.sigma_z2 = kv.at("sigma_z2");
  c.w1 = kv.at("w1");
  c.w2 = kv.at("w2");
  c.w3 = kv.at("w3");
  if (!(c.sigma_z2 > 0.0)) throw ConfigError(path + ": sigma_z2 must be > 0");
  return c;
}

// Assemble a full problem statement from the two tables.
inline OcpSpec make_ocp_spec(const ActuatorParams& params, const OptimizationConfig& opt,
                             Mode mode) {
  OcpSpec spec;
  spec.mode = mode;
  spec.params = params;
  spec.u_minus = opt.u_minus;
  spec.u_plus = opt.u_plus;
  spec.z_0 = opt.z_0;
  spec.z_f = opt.z_f;
  spec.t_f = opt.t_f;
  spec.weights.w1 = opt.w1;
  spec.weights.w2 = opt.w2;
  spec.weights.w3 = opt.w3;
  spec.contact.mu_z = opt.mu_z;
  spec.contact.sigma_z = std::sqrt(opt.sigma_z2);
  spec.contact.motion_sign = opt.z_f < opt.z_0 ? -1 : 1;
  spec.contact.z_start = opt.z_0;
  spec.contact.z_end = opt.z_f;
  spec.contact.t_f = opt.t_f;
  spec.validate();
  return spec;
}

}  // namespace softland
