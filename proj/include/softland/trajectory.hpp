#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "softland/actuator.hpp"
#include "softland/errors.hpp"

namespace softland {

// Solution mesh with state, costate, control and diagnostic channels. The
// interpolant is cubic Hermite per interval, built from the stored node
// derivatives (which solver and simulator both provide).
struct Trajectory {
  std::vector<double> t;
  std::vector<State> x;
  std::vector<State> xdot;
  std::vector<std::array<double, 3>> lambda;      // empty when no costates
  std::vector<std::array<double, 3>> lambda_dot;
  std::vector<double> u;  // control/voltage channel
  std::vector<double> i;  // coil current channel

  struct Diagnostics {
    double max_collocation_residual = 0.0;
    double max_boundary_residual = 0.0;
    int newton_iterations = 0;
    std::vector<int> mesh_history;
    bool converged = false;
  } diag;

  std::size_t size() const { return t.size(); }
  double t0() const { return t.front(); }
  double tf() const { return t.back(); }
  bool has_costates() const { return !lambda.empty(); }

  void check() const {
    if (t.size() < 2 || t.size() != x.size() || t.size() != xdot.size())
      throw std::invalid_argument("trajectory: inconsistent channel lengths");
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
      if (!(t[k + 1] > t[k])) throw std::invalid_argument("trajectory: mesh not strictly increasing");
  }

  std::size_t interval_of(double tq) const {
    auto it = std::upper_bound(t.begin(), t.end(), tq);
    std::size_t i = static_cast<std::size_t>(it - t.begin());
    return std::clamp<std::size_t>(i, 1, t.size() - 1) - 1;
  }

  State state_at(double tq) const {
    const std::size_t k = interval_of(tq);
    const double h = t[k + 1] - t[k];
    const double s = (tq - t[k]) / h;
    State out;
    out.z = hermite(s, h, x[k].z, xdot[k].z, x[k + 1].z, xdot[k + 1].z);
    out.v = hermite(s, h, x[k].v, xdot[k].v, x[k + 1].v, xdot[k + 1].v);
    out.alpha = hermite(s, h, x[k].alpha, xdot[k].alpha, x[k + 1].alpha, xdot[k + 1].alpha);
    return out;
  }

  std::array<double, 3> costate_at(double tq) const {
    const std::size_t k = interval_of(tq);
    const double h = t[k + 1] - t[k];
    const double s = (tq - t[k]) / h;
    std::array<double, 3> out{};
    for (int j = 0; j < 3; ++j)
      out[j] = hermite(s, h, lambda[k][j], lambda_dot[k][j], lambda[k + 1][j], lambda_dot[k + 1][j]);
    return out;
  }

  // Linear interpolation is enough for the sampled control channel.
  double control_at(double tq) const {
    const std::size_t k = interval_of(tq);
    const double s = (tq - t[k]) / (t[k + 1] - t[k]);
    return (1.0 - s) * u[k] + s * u[k + 1];
  }

  static double hermite(double s, double h, double y0, double d0, double y1, double d1) {
    const double s2 = s * s, s3 = s2 * s;
    return (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 +
           (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1;
  }
};

// Direction of travel of the position channel: -1, +1, or throws if the
// channel reverses beyond tolerance (micro-oscillations near v = 0 from
// collocation interpolants are ignored).
inline int checked_motion_sign(const Trajectory& traj, double tol_z = 1e-9, double tol_t = 1e-6) {
  const double span = traj.x.back().z - traj.x.front().z;
  const int sign = span >= 0.0 ? 1 : -1;
  for (std::size_t k = 0; k + 1 < traj.t.size(); ++k) {
    const double dz = traj.x[k + 1].z - traj.x[k].z;
    const double dt = traj.t[k + 1] - traj.t[k];
    if (dz * sign < 0.0 && std::abs(dz) > tol_z && dt > tol_t)
      throw MonotonicityViolation("position channel reverses direction at t = " +
                                  std::to_string(traj.t[k]));
  }
  return sign;
}

}  // namespace softland
