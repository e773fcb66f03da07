#pragma once

#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "softland/contact.hpp"
#include "softland/costs.hpp"
#include "softland/errors.hpp"
#include "softland/ocp.hpp"
#include "softland/trajectory.hpp"

namespace softland {

// 17 significant digits: enough to round-trip an IEEE double exactly, so
// re-reading a written file reproduces bit-identical values.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Write-temp-then-rename so readers never observe a half-written file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir, ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  // strtod instead of stod: subnormal values must parse (stod throws
  // out_of_range on underflow).
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin) {
    while (*end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
    if (*end == '\0' && !std::isinf(v)) return v;
  }
  throw SchemaError("not a number in " + context + ": '" + s + "'");
}

}  // namespace detail

// Generic numeric table writer: header row + rows of doubles, '\n' endings.
inline void write_table_csv(const std::filesystem::path& path,
                            const std::vector<std::string>& header,
                            const std::vector<std::vector<double>>& rows) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j)
    out << header[j] << (j + 1 < header.size() ? "," : "");
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw SchemaError("csv row width " + std::to_string(row.size()) + " != header width " +
                        std::to_string(header.size()));
    for (std::size_t j = 0; j < row.size(); ++j)
      out << format_g17(row[j]) << (j + 1 < row.size() ? "," : "");
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

inline std::vector<std::vector<double>> read_table_csv(const std::filesystem::path& path,
                                                       const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty csv: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto got = detail::split_csv_line(line);
  if (got.size() != header.size())
    throw SchemaError(path.string() + ": expected " + std::to_string(header.size()) +
                      " columns, found " + std::to_string(got.size()));
  for (std::size_t j = 0; j < header.size(); ++j)
    if (got[j] != header[j])
      throw SchemaError(path.string() + ": column " + std::to_string(j) + " is '" + got[j] +
                        "', expected '" + header[j] + "'");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields)
      row.push_back(detail::parse_double(f, path.string() + ":" + std::to_string(lineno)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const std::vector<std::string>& trajectory_csv_header() {
  static const std::vector<std::string> h{"t",       "z",       "v",       "alpha", "lambda1",
                                          "lambda2", "lambda3", "u",       "i",     "f_Tc",
                                          "V1",      "V2",      "V3"};
  return h;
}

// Trajectory CSV: one row per mesh node with the state/costate/control
// channels plus the contact-time density and the three running-cost rates
// evaluated with the spec's weights.
inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                                 const OcpSpec& spec) {
  std::vector<std::vector<double>> rows;
  rows.reserve(traj.size());
  CostWeights w = spec.weights;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const State& s = traj.x[k];
    const double u = traj.u[k];
    const std::array<double, 3> lam =
        traj.has_costates() ? traj.lambda[k] : std::array<double, 3>{0.0, 0.0, 0.0};
    const double ftc = contact_time_pdf<double>(s, spec.contact);
    const double v1 = w.w1 > 0.0 ? v1_rate<double>(s, spec.contact, w) : 0.0;
    const double v2 =
        w.w2 > 0.0 ? v2_rate<double>(s, u, spec.contact, spec.params, spec.bounce, w) : 0.0;
    const double v3 = w.w3 > 0.0 ? v3_rate<double>(s, u, spec.params, w) : 0.0;
    rows.push_back({traj.t[k], s.z, s.v, s.alpha, lam[0], lam[1], lam[2], u, traj.i[k], ftc, v1,
                    v2, v3});
  }
  write_table_csv(path, trajectory_csv_header(), rows);
}

// Reads the node channels back; xdot/lambda_dot are not stored in the CSV and
// are left empty (interpolation of read trajectories is piecewise linear).
inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  const auto rows = read_table_csv(path, trajectory_csv_header());
  if (rows.size() < 2) throw SchemaError(path.string() + ": fewer than two trajectory nodes");
  Trajectory traj;
  for (const auto& r : rows) {
    traj.t.push_back(r[0]);
    traj.x.push_back({r[1], r[2], r[3]});
    traj.xdot.push_back({r[2], 0.0, 0.0});  // dz/dt = v is exact; rest unknown
    traj.lambda.push_back({r[4], r[5], r[6]});
    traj.lambda_dot.push_back({0.0, 0.0, 0.0});
    traj.u.push_back(r[7]);
    traj.i.push_back(r[8]);
  }
  for (std::size_t k = 0; k + 1 < traj.t.size(); ++k)
    if (!(traj.t[k + 1] > traj.t[k]))
      throw SchemaError(path.string() + ": time column not strictly increasing");
  return traj;
}

// Consumed electrical energy, resistive convention: int u^2/R dt [mJ].
inline double energy_resistive_mJ(const std::vector<double>& t, const std::vector<double>& u,
                                  double R) {
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    e += 0.5 * (u[k] * u[k] + u[k + 1] * u[k + 1]) * (t[k + 1] - t[k]);
  return e / R * 1e3;
}

// Coil terminal energy, int u*i dt [mJ]; eddy-dominated during fast flux
// transients, reported as a diagnostic alongside the resistive figure.
inline double energy_ui_mJ(const std::vector<double>& t, const std::vector<double>& u,
                           const std::vector<double>& i) {
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    e += 0.5 * (u[k] * i[k] + u[k + 1] * i[k + 1]) * (t[k + 1] - t[k]);
  return e * 1e3;
}

inline double energy_resistive_mJ(const Trajectory& traj, const ActuatorParams& p) {
  return energy_resistive_mJ(traj.t, traj.u, p.R);
}

inline double energy_ui_mJ(const Trajectory& traj) { return energy_ui_mJ(traj.t, traj.u, traj.i); }

}  // namespace softland
