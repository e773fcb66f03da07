#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "softland/collocation.hpp"
#include "softland/ocp.hpp"
#include "softland/trajectory.hpp"

namespace softland {

namespace detail {

inline Eigen::VectorXd state_scales(const OcpSpec& spec) {
  const auto& p = spec.params;
  const double z_s = std::max(std::abs(spec.z_0), std::abs(spec.z_f));
  const double v_s = std::max(1e-3, 3.0 * std::abs(spec.z_f - spec.z_0) / spec.t_f);
  const double a_s = std::max({force_balance_flux(spec.z_0, p), force_balance_flux(spec.z_f, p), 1e-7});

  // costate magnitudes that put q* at the voltage-bound scale
  const double g = voltage_gain_alpha(p);
  double lam3;
  if (spec.mode == Mode::EOS) {
    lam3 = 2.0 * spec.u_plus / g;
  } else {
    const StateT<double> s{0.5 * (spec.z_0 + spec.z_f), 0.0, a_s};
    const auto r = current_rate_coeffs(s, p);
    lam3 = std::max(2.0 * spec.weights.w3 * r.c1 * r.c1 * spec.u_plus / g, 2.0 * spec.u_plus / g);
  }
  const double lam2 = std::max(1.0, lam3 * a_s / v_s);
  const double lam1 = std::max(1.0, lam2 * v_s / z_s);

  Eigen::VectorXd sc(6);
  sc << z_s, v_s, a_s, lam1, lam2, lam3;
  return sc;
}

inline Eigen::VectorXd bc_scales(const OcpSpec& spec, const Eigen::VectorXd& ys) {
  const double accel = spec.params.k_s * spec.params.z_s / spec.params.m;
  Eigen::VectorXd sc(6);
  if (spec.mode == Mode::POS)
    sc << ys(0), ys(1), accel, ys(0), ys(4), ys(5);
  else
    sc << ys(0), ys(1), accel, ys(0), ys(1), accel;
  return sc;
}

inline void default_guess(const OcpSpec& spec, Eigen::VectorXd& mesh, Eigen::MatrixXd& guess) {
  const int n = std::max(8, spec.solver.initial_mesh) + 1;
  mesh.resize(n);
  guess.resize(6, n);
  const double slope = (spec.z_f - spec.z_0) / spec.t_f;
  for (int k = 0; k < n; ++k) {
    const double tau = static_cast<double>(k) / (n - 1);
    mesh(k) = tau * spec.t_f;
    const double z = spec.z_0 + slope * spec.t_f * tau;
    guess(0, k) = z;
    guess(1, k) = slope;
    guess(2, k) = force_balance_flux(z, spec.params);
    guess(3, k) = 0.0;
    guess(4, k) = 0.0;
    guess(5, k) = 0.0;
  }
}

// Rebuild a trajectory on an arc-length-equidistributed mesh of n_target
// nodes. Warm starts otherwise only ever gain nodes across continuation
// stages; redistribution keeps the count bounded while concentrating nodes
// where the solution actually bends.
inline Trajectory remesh_equidistributed(const Trajectory& g, int n_target) {
  const int n = static_cast<int>(g.size());
  if (n_target < 2 || n < 2) return g;

  std::array<double, 6> scale{};
  for (int k = 0; k < n; ++k) {
    scale[0] = std::max(scale[0], std::abs(g.x[k].z));
    scale[1] = std::max(scale[1], std::abs(g.x[k].v));
    scale[2] = std::max(scale[2], std::abs(g.x[k].alpha));
    for (int j = 0; j < 3; ++j) scale[3 + j] = std::max(scale[3 + j], std::abs(g.lambda[k][j]));
  }
  for (double& s : scale) s = std::max(s, 1e-30);

  const double T = g.tf() - g.t0();
  std::vector<double> cum(n, 0.0);
  for (int k = 0; k + 1 < n; ++k) {
    const auto slope = [&](int a, int b, auto get) {
      return (get(b) - get(a)) / (g.t[b] - g.t[a]);
    };
    double m2 = 1.0;  // baseline keeps smooth regions populated
    m2 += std::pow(slope(k, k + 1, [&](int q) { return g.x[q].z; }) * T / scale[0], 2);
    m2 += std::pow(slope(k, k + 1, [&](int q) { return g.x[q].v; }) * T / scale[1], 2);
    m2 += std::pow(slope(k, k + 1, [&](int q) { return g.x[q].alpha; }) * T / scale[2], 2);
    for (int j = 0; j < 3; ++j)
      m2 += std::pow(slope(k, k + 1, [&](int q) { return g.lambda[q][j]; }) * T / scale[3 + j], 2);
    cum[k + 1] = cum[k] + std::sqrt(m2) * (g.t[k + 1] - g.t[k]);
  }

  Trajectory out;
  out.t.resize(n_target);
  out.x.resize(n_target);
  out.xdot.assign(n_target, State{});
  out.lambda.resize(n_target);
  out.lambda_dot.assign(n_target, {0.0, 0.0, 0.0});
  out.u.assign(n_target, 0.0);
  out.i.assign(n_target, 0.0);
  int seg = 0;
  for (int k = 0; k < n_target; ++k) {
    const double target = cum.back() * k / (n_target - 1);
    while (seg + 2 < n && cum[seg + 1] < target) ++seg;
    const double f = (target - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    double t = g.t[seg] + std::min(std::max(f, 0.0), 1.0) * (g.t[seg + 1] - g.t[seg]);
    if (k == 0) t = g.t0();
    if (k == n_target - 1) t = g.tf();
    out.t[k] = t;
    out.x[k] = g.state_at(t);
    out.lambda[k] = g.has_costates() ? g.costate_at(t) : std::array<double, 3>{0.0, 0.0, 0.0};
  }
  for (int k = 0; k + 1 < n_target; ++k)
    if (!(out.t[k + 1] > out.t[k]))
      return g;  // degenerate monitor; keep the original mesh
  return out;
}

}  // namespace detail

// Solve the state/costate two-point BVP of the chosen mode by collocation.
// Deterministic given spec + guess.
inline Trajectory solve(const OcpSpec& spec, const std::optional<Trajectory>& initial_guess = {}) {
  spec.validate();

  Eigen::VectorXd mesh;
  Eigen::MatrixXd guess;
  if (initial_guess) {
    const Trajectory& g = *initial_guess;
    const int n = static_cast<int>(g.size());
    mesh.resize(n);
    guess.resize(6, n);
    const double stretch = spec.t_f / (g.tf() - g.t0());
    for (int k = 0; k < n; ++k) {
      mesh(k) = (g.t[k] - g.t0()) * stretch;
      guess(0, k) = g.x[k].z;
      guess(1, k) = g.x[k].v;
      guess(2, k) = g.x[k].alpha;
      guess(3, k) = g.has_costates() ? g.lambda[k][0] : 0.0;
      guess(4, k) = g.has_costates() ? g.lambda[k][1] : 0.0;
      guess(5, k) = g.has_costates() ? g.lambda[k][2] : 0.0;
    }
  } else {
    detail::default_guess(spec, mesh, guess);
  }

  BvpOptions opts;
  opts.rel_tol = spec.solver.rel_tol;
  opts.abs_tol = spec.solver.abs_tol;
  opts.max_nodes = spec.solver.max_mesh;
  opts.max_newton = spec.solver.max_newton;
  opts.damping_floor = spec.solver.newton_damping_floor;
  opts.verbose = spec.solver.verbose;
  // warm starts carry useful costate magnitudes; fold them into the scales
  opts.y_scale = detail::state_scales(spec);
  for (int j = 0; j < 6; ++j)
    opts.y_scale(j) = std::max(opts.y_scale(j), guess.row(j).cwiseAbs().maxCoeff());
  opts.bc_scale = detail::bc_scales(spec, opts.y_scale);

  CollocationSolver solver(
      6,
      [&spec](double, const double* y, double* dy) { pmp_rhs(y, dy, spec); },
      [&spec](const double* y0, const double* yf, double* res) {
        const State x0{y0[0], y0[1], y0[2]};
        const State xf{yf[0], yf[1], yf[2]};
        const std::array<double, 3> lam_f{yf[3], yf[4], yf[5]};
        const auto r = boundary_residuals(spec.mode, x0, xf, lam_f, spec);
        std::copy(r.begin(), r.end(), res);
      },
      opts);

  const BvpSolution sol = solver.solve(mesh, guess);

  Trajectory traj;
  const int n = static_cast<int>(sol.t.size());
  traj.t.resize(n);
  traj.x.resize(n);
  traj.xdot.resize(n);
  traj.lambda.resize(n);
  traj.lambda_dot.resize(n);
  traj.u.resize(n);
  traj.i.resize(n);
  const double flux_cap = spec.params.reluctance.flux_limit();
  for (int k = 0; k < n; ++k) {
    traj.t[k] = sol.t(k);
    traj.x[k] = {sol.y(0, k), sol.y(1, k), sol.y(2, k)};
    traj.xdot[k] = {sol.yp(0, k), sol.yp(1, k), sol.yp(2, k)};
    traj.lambda[k] = {sol.y(3, k), sol.y(4, k), sol.y(5, k)};
    traj.lambda_dot[k] = {sol.yp(3, k), sol.yp(4, k), sol.yp(5, k)};
    traj.u[k] = optimal_control<double>(traj.x[k], traj.lambda[k], spec);
    traj.i[k] = coil_current<double>(traj.x[k], traj.xdot[k].alpha, spec.params);
    if (std::abs(traj.x[k].alpha) >= flux_cap)
      throw NoConvergence("solve: solution flux reaches the saturation margin", sol.max_defect);
  }
  traj.diag.max_collocation_residual = sol.max_defect;
  traj.diag.max_boundary_residual = sol.max_bc_residual;
  traj.diag.newton_iterations = sol.newton_iterations;
  traj.diag.mesh_history = sol.mesh_history;
  traj.diag.converged = sol.converged;
  return traj;
}

// Homotopy wrapper: chain solves over the continuation schedule (inflated
// sigma_z first, softer clamp first), each warm-started from the previous
// trajectory. A default schedule is supplied per mode when the spec does not
// carry one.
inline Trajectory continuation_solve(const OcpSpec& spec) {
  spec.validate();
  std::vector<ContinuationStage> schedule = spec.solver.continuation_schedule;
  if (schedule.empty()) {
    if (spec.mode == Mode::EOS) {
      schedule = {{1.0, 1.0, 1.0}};
    } else {
      // ramp the probability weights in at a stroke-wide sigma, then tighten
      // sigma geometrically (ratio sqrt(2)), then sharpen the control clamp
      const double stroke = std::abs(spec.z_0 - spec.z_f);
      const double s0 = std::max(1.0, stroke / spec.contact.sigma_z);
      for (double w : {1e-6, 1e-3, 3e-2, 0.3, 1.0}) schedule.push_back({s0, w, 0.5});
      // descend along the fixed half-power-of-two ladder below s0
      std::vector<double> ladder;
      for (double s = std::sqrt(2.0); s < s0 * (1.0 - 1e-9); s *= std::sqrt(2.0))
        ladder.push_back(s);
      for (auto it = ladder.rbegin(); it != ladder.rend(); ++it)
        schedule.push_back({*it, 1.0, *it > 4.0 ? 0.5 : 1.0});
      schedule.push_back({1.0, 1.0, 1.0});
      schedule.push_back({1.0, 1.0, 4.0});
    }
  }

  const auto stage_spec = [&spec](const ContinuationStage& st, bool final_stage) {
    OcpSpec staged = spec;
    staged.solver.continuation_schedule.clear();
    staged.contact.sigma_z = spec.contact.sigma_z * st.sigma_scale;
    staged.weights.w1 = spec.weights.w1 * st.weight_scale;
    staged.weights.w2 = spec.weights.w2 * st.weight_scale;
    staged.solver.clamp_sharpness_beta = spec.solver.clamp_sharpness_beta * st.beta_scale;
    staged.u_effort_reg = st.u_effort;
    // intermediate stages only need a loose mesh; the final stage gets the
    // requested tolerances
    if (!final_stage) {
      staged.solver.rel_tol = std::max(spec.solver.rel_tol, 1e-6);
      staged.solver.abs_tol = std::max(spec.solver.abs_tol, 1e-8);
    }
    return staged;
  };
  // geometric midpoint between two stages, for step bisection on failure
  const auto midpoint = [](const ContinuationStage& a, const ContinuationStage& b) {
    ContinuationStage m;
    m.sigma_scale = std::sqrt(a.sigma_scale * b.sigma_scale);
    m.weight_scale = std::sqrt(a.weight_scale * b.weight_scale);
    m.beta_scale = std::sqrt(a.beta_scale * b.beta_scale);
    m.u_effort = 0.5 * (a.u_effort + b.u_effort);
    return m;
  };

  std::optional<Trajectory> warm;
  ContinuationStage achieved{};
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    // pending targets for this stage, handled back-to-front so bisected
    // midpoints are solved before the original target is retried
    int splits = 0;
    std::vector<ContinuationStage> pending{schedule[stage]};
    while (!pending.empty()) {
      const ContinuationStage cur = pending.back();
      const bool final_stage = (stage + 1 == schedule.size()) && pending.size() == 1;
      try {
        if (warm) {
          const int cap = std::min(600, spec.solver.max_mesh / 2);
          const int n = std::min(static_cast<int>(warm->size()), std::max(cap, 160));
          warm = detail::remesh_equidistributed(*warm, n);
        }
        warm = solve(stage_spec(cur, final_stage), warm);
        achieved = cur;
        pending.pop_back();
        if (spec.solver.verbose)
          std::fprintf(stderr, "stage %zu: sigma_scale=%g weight=%g beta=%g nodes=%zu\n", stage,
                       cur.sigma_scale, cur.weight_scale, cur.beta_scale, warm->size());
      } catch (const NoConvergence& e) {
        if (!warm || ++splits > 12)
          throw NoConvergence(std::string("continuation stage failed: ") + e.what(),
                              e.last_residual, static_cast<int>(stage));
        pending.push_back(midpoint(achieved, cur));
      } catch (const MeshLimitExceeded&) {
        // an exploding mesh also means the step was too ambitious
        if (!warm || ++splits > 12) throw;
        pending.push_back(midpoint(achieved, cur));
      }
    }
  }
  return *warm;
}

}  // namespace softland
