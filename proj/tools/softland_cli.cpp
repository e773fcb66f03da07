// Command-line front end: wires the config files to the solver, the hybrid
// simulator, the Monte Carlo and sweep experiments, and the identification
// pipeline. Every command writes its outputs atomically into --out.
//
// Exit codes: 0 success, 2 configuration/argument error, 3 solver or
// simulation failure, 4 I/O error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "softland/config.hpp"
#include "softland/contact.hpp"
#include "softland/costs.hpp"
#include "softland/errors.hpp"
#include "softland/expectations.hpp"
#include "softland/identification.hpp"
#include "softland/io.hpp"
#include "softland/montecarlo.hpp"
#include "softland/ocp.hpp"
#include "softland/sim.hpp"
#include "softland/solve.hpp"
#include "softland/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace softland;

namespace {

void write_json_atomic(const fs::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

json actuator_json(const ActuatorParams& p) {
  return json{{"R", p.R},
              {"N", p.N},
              {"m", p.m},
              {"k_s", p.k_s},
              {"z_s", p.z_s},
              {"c_f", p.c_f},
              {"k_1", p.reluctance.k1()},
              {"k_2", p.reluctance.k2()},
              {"k_ec", p.k_ec},
              {"z_min", p.z_min},
              {"z_max", p.z_max},
              {"gap_slope", p.reluctance.gap_slope()}};
}

json optimization_json(const OptimizationConfig& o) {
  return json{{"u_minus", o.u_minus}, {"u_plus", o.u_plus}, {"z_0", o.z_0},
              {"z_f", o.z_f},         {"t_f", o.t_f},       {"mu_z", o.mu_z},
              {"sigma_z2", o.sigma_z2}, {"w1", o.w1},       {"w2", o.w2},
              {"w3", o.w3}};
}

// Expectations, cost breakdown and energy figures of one trajectory under a
// given contact model; shared by solve and compare.
json evaluate_design(const Trajectory& traj, const OcpSpec& spec) {
  const auto ctrl = [&traj](double t) { return traj.control_at(t); };
  const double evc = expected_contact_velocity(traj, spec.contact);
  const double eac =
      expected_contact_acceleration(traj, ctrl, spec.contact, spec.params, spec.bounce);
  const CostBreakdown cb = total_cost(traj, ctrl, spec.contact, spec.params, spec.bounce,
                                      spec.weights, spec.mode == Mode::EOS);
  return json{{"E_Vc", evc},
              {"E_Ac", eac},
              {"contact_probability", spec.contact.contact_probability_constant()},
              {"cost", {{"j1", cb.j1}, {"j2", cb.j2}, {"j3", cb.j3}, {"j_eos", cb.j_eos},
                        {"total", cb.total()}}},
              {"energy_mJ", energy_resistive_mJ(traj, spec.params)},
              {"energy_ui_mJ", energy_ui_mJ(traj)}};
}

// Fig. "state plane" style export: per node, position against velocity,
// saturated bounce acceleration and contact-position density.
void write_phase_csv(const fs::path& path, const Trajectory& traj, const OcpSpec& spec) {
  std::vector<std::vector<double>> rows;
  rows.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const State& s = traj.x[k];
    const double a_sat = saturated_bounce_acceleration_hard(s, traj.u[k], spec.params,
                                                            spec.contact, spec.bounce);
    rows.push_back({s.z, s.v, a_sat, spec.contact.pdf(s.z)});
  }
  write_table_csv(path, {"z", "v", "a_b_sat", "f_Zc"}, rows);
}

struct CommonPaths {
  std::string actuator;
  std::string optimization;
  std::string out;
};

void add_common(CLI::App* cmd, CommonPaths& cp, bool need_opt = true) {
  cmd->add_option("--actuator", cp.actuator, "actuator parameter config (INI)")->required();
  if (need_opt)
    cmd->add_option("--optimization", cp.optimization, "optimization parameter config (INI)")
        ->required();
  cmd->add_option("--out", cp.out, "output directory")->required();
}

OcpSpec load_spec(const CommonPaths& cp, Mode mode, OptimizationConfig* opt_out = nullptr) {
  const ActuatorParams p = load_actuator_config(cp.actuator);
  const OptimizationConfig o = load_optimization_config(cp.optimization);
  if (opt_out) *opt_out = o;
  return make_ocp_spec(p, o, mode);
}

// ---------------------------------------------------------------- solve ----

int cmd_solve(const CommonPaths& cp, const std::string& mode_str, bool verbose) {
  const Mode mode = mode_str == "eos" ? Mode::EOS : Mode::POS;
  OptimizationConfig opt;
  OcpSpec spec = load_spec(cp, mode, &opt);
  spec.solver.verbose = verbose;

  const Trajectory traj = continuation_solve(spec);

  const fs::path out(cp.out);
  write_trajectory_csv(out / "trajectory.csv", traj, spec);

  json meta;
  meta["command"] = "solve";
  meta["mode"] = mode_str;
  meta["actuator"] = actuator_json(spec.params);
  meta["optimization"] = optimization_json(opt);
  meta["solver"] = json{{"converged", traj.diag.converged},
                        {"newton_iterations", traj.diag.newton_iterations},
                        {"max_collocation_residual", traj.diag.max_collocation_residual},
                        {"max_boundary_residual", traj.diag.max_boundary_residual},
                        {"mesh_nodes", traj.size()},
                        {"mesh_history", traj.diag.mesh_history}};
  meta["result"] = evaluate_design(traj, spec);
  meta["boundary"] = json{{"z_0", traj.x.front().z},
                          {"z_f", traj.x.back().z},
                          {"v_0", traj.x.front().v},
                          {"v_f", traj.x.back().v}};
  write_json_atomic(out / "metadata.json", meta);
  std::fprintf(stderr, "solve %s: %zu nodes, residual %.3e, E[Vc] %.4g m/s\n", mode_str.c_str(),
               traj.size(), traj.diag.max_collocation_residual,
               meta["result"]["E_Vc"].get<double>());
  return 0;
}

// -------------------------------------------------------------- compare ----

int cmd_compare(const CommonPaths& cp, const std::string& pos_path,
                const std::string& eos_path) {
  OcpSpec pos_spec = load_spec(cp, Mode::POS);
  OcpSpec eos_spec = pos_spec;
  eos_spec.mode = Mode::EOS;

  const Trajectory pos = read_trajectory_csv(pos_path);
  const Trajectory eos = read_trajectory_csv(eos_path);

  const fs::path out(cp.out);
  write_phase_csv(out / "phase_pos.csv", pos, pos_spec);
  write_phase_csv(out / "phase_eos.csv", eos, eos_spec);

  const json jp = evaluate_design(pos, pos_spec);
  const json je = evaluate_design(eos, eos_spec);
  const double dv = std::abs(jp["E_Vc"].get<double>()) - std::abs(je["E_Vc"].get<double>());
  const double da = std::abs(jp["E_Ac"].get<double>()) - std::abs(je["E_Ac"].get<double>());
  const double de = jp["energy_mJ"].get<double>() - je["energy_mJ"].get<double>();

  json rep;
  rep["command"] = "compare";
  rep["pos"] = jp;
  rep["eos"] = je;
  rep["difference"] = json{{"abs_E_Vc", dv}, {"abs_E_Ac", da}, {"energy_mJ", de}};
  rep["pos_dominates"] = json{{"velocity", dv < 0.0}, {"acceleration", da < 0.0}};
  write_json_atomic(out / "report.json", rep);
  std::fprintf(stderr, "compare: |E[Vc]| diff %.4g m/s, |E[Ac]| diff %.4g m/s^2\n", dv, da);
  return 0;
}

// ----------------------------------------------------------- montecarlo ----

int cmd_montecarlo(const CommonPaths& cp, const std::string& traj_path,
                   const std::string& drive_csv, const std::string& kind, int n,
                   std::uint64_t seed, double restitution, double t_end_opt, int threads) {
  OptimizationConfig opt;
  const OcpSpec spec = load_spec(cp, Mode::POS, &opt);

  DriveSignal drive;
  std::optional<State> x0;
  if (!traj_path.empty()) {
    const Trajectory traj = read_trajectory_csv(traj_path);
    drive = kind == "current" ? DriveSignal::current_from(traj)
                              : DriveSignal::voltage_from(traj);
    x0 = traj.x.front();  // replay from the trajectory's own initial state
  } else {
    const auto rows = read_table_csv(drive_csv, {"t", "value"});
    drive.kind = kind == "current" ? DriveSignal::Kind::Current : DriveSignal::Kind::Voltage;
    for (const auto& r : rows) {
      drive.t.push_back(r[0]);
      drive.value.push_back(r[1]);
    }
  }
  drive.validate();
  const double t_end = t_end_opt > 0.0 ? t_end_opt : drive.t.back();

  McOptions mo;
  mo.seed = seed;
  mo.n_samples = n;
  mo.threads = threads;
  mo.sim.restitution = restitution;
  const McReport rep = monte_carlo(spec.params, drive, spec.contact, t_end, mo, x0);

  const fs::path out(cp.out);
  json j;
  j["command"] = "montecarlo";
  j["n_samples"] = rep.n_samples;
  j["seed"] = rep.seed;
  j["n_contacted"] = rep.n_contacted;
  j["p_contact"] = rep.p_contact;
  j["mean_contact_velocity"] = rep.mean_contact_velocity;
  j["std_contact_velocity"] = rep.std_contact_velocity;
  j["mean_contact_time"] = rep.mean_contact_time;
  j["std_contact_time"] = rep.std_contact_time;
  j["mean_bounce_accel"] = rep.mean_bounce_accel;
  j["std_bounce_accel"] = rep.std_bounce_accel;
  j["mean_energy_mJ"] = rep.mean_energy_mJ;
  j["mean_energy_ui_mJ"] = rep.mean_energy_ui_mJ;
  write_json_atomic(out / "montecarlo.json", j);
  write_table_csv(out / "montecarlo.csv",
                  {"n_samples", "p_contact", "mean_contact_velocity", "std_contact_velocity",
                   "mean_contact_time", "std_contact_time", "mean_bounce_accel",
                   "std_bounce_accel", "mean_energy_mJ", "mean_energy_ui_mJ"},
                  {{static_cast<double>(rep.n_samples), rep.p_contact,
                    rep.mean_contact_velocity, rep.std_contact_velocity, rep.mean_contact_time,
                    rep.std_contact_time, rep.mean_bounce_accel, rep.std_bounce_accel,
                    rep.mean_energy_mJ, rep.mean_energy_ui_mJ}});
  std::fprintf(stderr, "montecarlo: %d/%d contacted, mean v_c %.4g m/s\n", rep.n_contacted,
               rep.n_samples, rep.mean_contact_velocity);
  return 0;
}

// ---------------------------------------------------------------- sweep ----

int cmd_sweep(const CommonPaths& cp, std::vector<double> sigmas, bool verbose) {
  OcpSpec spec = load_spec(cp, Mode::POS);
  spec.solver.verbose = verbose;
  const std::vector<SweepPoint> table = sigma_sweep(spec, sigmas);

  std::vector<std::vector<double>> rows;
  json points = json::array();
  for (const SweepPoint& pt : table) {
    rows.push_back({pt.sigma_z, pt.evc_pos, pt.eac_pos, pt.evc_eos, pt.eac_eos,
                    pt.pos_ok ? 1.0 : 0.0, pt.eos_ok ? 1.0 : 0.0});
    points.push_back(json{{"sigma_z", pt.sigma_z},
                          {"pos_ok", pt.pos_ok},
                          {"eos_ok", pt.eos_ok},
                          {"E_Vc_pos", pt.evc_pos},
                          {"E_Ac_pos", pt.eac_pos},
                          {"E_Vc_eos", pt.evc_eos},
                          {"E_Ac_eos", pt.eac_eos},
                          {"pos_error", pt.pos_error},
                          {"eos_error", pt.eos_error}});
  }
  const fs::path out(cp.out);
  write_table_csv(out / "sweep.csv",
                  {"sigma_z", "evc_pos", "eac_pos", "evc_eos", "eac_eos", "pos_ok", "eos_ok"},
                  rows);
  write_json_atomic(out / "sweep.json", json{{"command", "sweep"}, {"points", points}});
  return 0;
}

// ------------------------------------------------------------- identify ----

const std::vector<std::string>& dataset_csv_header() {
  static const std::vector<std::string> h{"pulse", "t", "u", "i"};
  return h;
}

PulseDataset read_dataset_csv(const std::string& path) {
  const auto rows = read_table_csv(path, dataset_csv_header());
  if (rows.empty()) throw SchemaError(path + ": empty dataset");
  PulseDataset ds;
  double t0 = 0.0, t1 = 0.0;
  int current = -1;
  for (const auto& r : rows) {
    const int idx = static_cast<int>(r[0]);
    if (idx != current) {
      if (idx != current + 1)
        throw SchemaError(path + ": pulse indices must be consecutive from 0");
      current = idx;
      ds.pulses.emplace_back();
      t0 = r[1];
      t1 = 0.0;
    } else if (ds.pulses.back().u.size() == 1) {
      t1 = r[1];
    }
    ds.pulses.back().u.push_back(r[2]);
    ds.pulses.back().i.push_back(r[3]);
  }
  if (!(t1 > t0)) throw SchemaError(path + ": cannot infer sample rate");
  ds.sample_rate = 1.0 / (t1 - t0);
  ds.validate();
  return ds;
}

void write_dataset_csv(const fs::path& path, const PulseDataset& ds) {
  std::vector<std::vector<double>> rows;
  const double dt = ds.dt();
  for (std::size_t j = 0; j < ds.pulses.size(); ++j)
    for (std::size_t k = 0; k < ds.pulses[j].u.size(); ++k)
      rows.push_back({static_cast<double>(j), k * dt, ds.pulses[j].u[k], ds.pulses[j].i[k]});
  write_table_csv(path, dataset_csv_header(), rows);
}

void write_actuator_ini(const fs::path& path, const ActuatorParams& p) {
  std::string s = "[actuator]\n";
  const auto add = [&s](const char* key, double v) {
    s += std::string(key) + " = " + format_g17(v) + "\n";
  };
  add("R", p.R);
  add("N", p.N);
  add("m", p.m);
  add("k_s", p.k_s);
  add("z_s", p.z_s);
  add("c_f", p.c_f);
  add("k_1", p.reluctance.k1());
  add("k_2", p.reluctance.k2());
  add("k_ec", p.k_ec);
  add("z_min", p.z_min);
  add("z_max", p.z_max);
  add("gap_slope", p.reluctance.gap_slope());
  write_text_atomic(path, s);
}

struct IdentifyArgs {
  std::string dataset;
  bool synthetic = false;
  int pulses = 26;
  double rate = 2e5;
  double u_low = 25.0, u_high = 50.0;
  double t_on = 8e-3, t_off = 7e-3;
  double perturb = 0.0;
  std::string save_dataset;
  int max_evals = 3000;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_identify(const CommonPaths& cp, const IdentifyArgs& a) {
  const ActuatorParams base = load_actuator_config(cp.actuator);

  PulseDataset ds;
  if (a.synthetic) {
    SyntheticProtocol proto;
    proto.n_pulses = a.pulses;
    proto.sample_rate = a.rate;
    proto.u_low = a.u_low;
    proto.u_high = a.u_high;
    proto.t_on = a.t_on;
    proto.t_off = a.t_off;
    ds = generate_synthetic_dataset(base, proto);
  } else {
    ds = read_dataset_csv(a.dataset);
  }
  if (!a.save_dataset.empty()) write_dataset_csv(a.save_dataset, ds);

  // Initial guess: the config values, optionally perturbed by an alternating
  // relative factor (useful with --synthetic, where the config is the truth).
  ActuatorParams guess = base;
  if (a.perturb != 0.0) {
    auto x = detail::to_log_params(base);
    for (int j = 0; j < 7; ++j)
      x[static_cast<std::size_t>(j)] += std::log1p((j % 2 == 0 ? 1.0 : -1.0) * a.perturb);
    guess = detail::apply_log_params(base, x);
  }

  FitOptions fo;
  fo.max_evals = a.max_evals;
  fo.seed = a.seed;
  fo.threads = a.threads;
  const FitReport rep = fit(ds, guess, fo);

  const fs::path out(cp.out);
  json j;
  j["command"] = "identify";
  j["R"] = rep.R;
  j["initial_cost"] = rep.initial_cost;
  j["cost"] = rep.cost;
  j["evaluations"] = rep.evaluations;
  j["params"] = actuator_json(rep.params);
  if (a.synthetic) {
    j["truth"] = actuator_json(base);
    j["relative_error"] = json{{"m", rep.params.m / base.m - 1.0},
                               {"k_s", rep.params.k_s / base.k_s - 1.0},
                               {"z_s", rep.params.z_s / base.z_s - 1.0},
                               {"c_f", rep.params.c_f / base.c_f - 1.0},
                               {"k_ec", rep.params.k_ec / base.k_ec - 1.0}};
  }
  write_json_atomic(out / "fit.json", j);
  write_actuator_ini(out / "fitted.ini", rep.params);
  {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < rep.trace.size(); ++k)
      rows.push_back({static_cast<double>(k + 1), rep.trace[k]});
    write_table_csv(out / "trace.csv", {"evaluation", "best_cost"}, rows);
  }
  std::fprintf(stderr, "identify: cost %.4g -> %.4g in %d evaluations (R = %.4g ohm)\n",
               rep.initial_cost, rep.cost, rep.evaluations, rep.R);
  return 0;
}

// Maps library exceptions to the documented exit-code contract.
int run_mapped(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "input schema error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const NoConvergence& e) {
    std::fprintf(stderr, "solver failed: %s (last residual %.3e)\n", e.what(),
                 e.last_residual);
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"soft-landing trajectory design for short-stroke reluctance actuators"};
  app.require_subcommand(1);

  // solve
  CommonPaths solve_cp;
  std::string solve_mode = "pos";
  bool solve_verbose = false;
  auto* solve = app.add_subcommand("solve", "solve the optimal control problem");
  add_common(solve, solve_cp);
  solve->add_option("--mode", solve_mode, "pos (probabilistic soft landing) or eos (energy)")
      ->check(CLI::IsMember({"pos", "eos"}));
  solve->add_flag("--verbose", solve_verbose, "print continuation progress");

  // compare
  CommonPaths cmp_cp;
  std::string cmp_pos, cmp_eos;
  auto* cmp = app.add_subcommand("compare", "compare two solved trajectories");
  add_common(cmp, cmp_cp);
  cmp->add_option("--pos", cmp_pos, "POS trajectory CSV")->required();
  cmp->add_option("--eos", cmp_eos, "EOS trajectory CSV")->required();

  // montecarlo
  CommonPaths mc_cp;
  std::string mc_traj, mc_drive, mc_kind = "voltage";
  int mc_n = 1000, mc_threads = 0;
  std::uint64_t mc_seed = 0;
  double mc_rest = 0.0, mc_tend = 0.0;
  auto* mc = app.add_subcommand("montecarlo", "Monte Carlo contact statistics under a drive");
  add_common(mc, mc_cp);
  auto* mc_t = mc->add_option("--trajectory", mc_traj, "trajectory CSV providing the drive");
  auto* mc_d = mc->add_option("--drive-csv", mc_drive, "drive CSV with columns t,value");
  mc_t->excludes(mc_d);
  mc->add_option("--kind", mc_kind, "drive channel")->check(CLI::IsMember({"voltage", "current"}));
  mc->add_option("--n", mc_n, "number of samples")->check(CLI::PositiveNumber);
  mc->add_option("--seed", mc_seed, "random seed");
  mc->add_option("--restitution", mc_rest, "seat coefficient of restitution")
      ->check(CLI::Range(0.0, 1.0));
  mc->add_option("--t-end", mc_tend, "simulation horizon [s] (default: drive duration)");
  mc->add_option("--threads", mc_threads, "worker threads (0 = hardware)");

  // sweep
  CommonPaths sw_cp;
  std::vector<double> sw_sigmas;
  bool sw_verbose = false;
  auto* sw = app.add_subcommand("sweep", "re-solve POS across contact-position sigmas");
  add_common(sw, sw_cp);
  sw->add_option("--sigmas", sw_sigmas, "ascending sigma_z list [m]")
      ->required()
      ->delimiter(',');
  sw->add_flag("--verbose", sw_verbose, "print continuation progress");

  // identify
  CommonPaths id_cp;
  IdentifyArgs id;
  auto* idc = app.add_subcommand("identify", "fit model parameters to pulse records");
  add_common(idc, id_cp, /*need_opt=*/false);
  auto* id_data = idc->add_option("--dataset", id.dataset, "pulse dataset CSV (pulse,t,u,i)");
  auto* id_syn = idc->add_flag("--synthetic", id.synthetic,
                               "generate the dataset from the actuator config");
  id_data->excludes(id_syn);
  id_syn->excludes(id_data);
  idc->add_option("--pulses", id.pulses, "synthetic pulse count")->check(CLI::PositiveNumber);
  idc->add_option("--rate", id.rate, "synthetic sample rate [Hz]")->check(CLI::PositiveNumber);
  idc->add_option("--u-low", id.u_low, "lowest pulse amplitude [V]");
  idc->add_option("--u-high", id.u_high, "highest pulse amplitude [V]");
  idc->add_option("--t-on", id.t_on, "pulse on-time [s]");
  idc->add_option("--t-off", id.t_off, "pulse off-time [s]");
  idc->add_option("--perturb", id.perturb, "alternating relative perturbation of the start");
  idc->add_option("--save-dataset", id.save_dataset, "also write the dataset CSV here");
  idc->add_option("--max-evals", id.max_evals, "objective evaluation budget")
      ->check(CLI::PositiveNumber);
  idc->add_option("--seed", id.seed, "random seed (initial simplex jitter)");
  idc->add_option("--threads", id.threads, "worker threads (0 = hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  return run_mapped([&]() -> int {
    if (solve->parsed()) return cmd_solve(solve_cp, solve_mode, solve_verbose);
    if (cmp->parsed()) return cmd_compare(cmp_cp, cmp_pos, cmp_eos);
    if (mc->parsed())
      return cmd_montecarlo(mc_cp, mc_traj, mc_drive, mc_kind, mc_n, mc_seed, mc_rest, mc_tend,
                            mc_threads);
    if (sw->parsed()) return cmd_sweep(sw_cp, sw_sigmas, sw_verbose);
    if (idc->parsed()) {
      if (!id.synthetic && id.dataset.empty())
        throw ConfigError("identify: need --dataset or --synthetic");
      return cmd_identify(id_cp, id);
    }
    return 2;
  });
}
