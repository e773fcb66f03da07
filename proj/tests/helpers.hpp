#pragma once

// Shared fixtures for the test suite: reference problem setups, deterministic
// pseudo-random inputs, and small analytic trajectories used as oracles.

#include <array>
#include <cmath>
#include <vector>

#include "softland/actuator.hpp"
#include "softland/config.hpp"
#include "softland/contact.hpp"
#include "softland/montecarlo.hpp"
#include "softland/ocp.hpp"
#include "softland/trajectory.hpp"

namespace testutil {

using namespace softland;

inline ActuatorParams reference_params() { return ActuatorParams::reference_valve(); }

// The bundled design problem: +-45 V, 1.6 mm -> 0.399 mm in 3.5 ms, Gaussian
// contact position centered on the seat with 2e-5 m standard deviation.
inline OcpSpec reference_spec(Mode mode) {
  OptimizationConfig o;
  o.u_minus = -45.0;
  o.u_plus = 45.0;
  o.z_0 = 1.60e-3;
  o.z_f = 3.99e-4;
  o.t_f = 3.5e-3;
  o.mu_z = 3.99e-4;
  o.sigma_z2 = 4.0e-10;
  o.w1 = 1.0e6;
  o.w2 = 1.0e3;
  o.w3 = 1.0;
  return make_ocp_spec(reference_params(), o, mode);
}

// Deterministic uniform draw in [lo, hi] from the counter-based stream.
inline double udraw(std::uint64_t seed, std::uint64_t k, std::uint64_t stream, double lo,
                    double hi) {
  return lo + (hi - lo) * rng::uniform01(seed, k, stream);
}

// Random state within the operating envelope of the reference valve.
inline State random_state(std::uint64_t k, std::uint64_t seed = 42) {
  const ActuatorParams p = reference_params();
  State s;
  s.z = udraw(seed, k, 10, p.z_min, p.z_max);
  s.v = udraw(seed, k, 11, -1.0, 1.0);
  s.alpha = udraw(seed, k, 12, -0.6, 0.6) * p.reluctance.flux_limit();
  return s;
}

inline std::array<double, 3> random_costate(std::uint64_t k, double scale,
                                            std::uint64_t seed = 42) {
  return {scale * udraw(seed, k, 20, -1.0, 1.0), scale * udraw(seed, k, 21, -1.0, 1.0),
          scale * udraw(seed, k, 22, -1.0, 1.0)};
}

// Monotone cubic position profile z(t) from z0 to zf on [0, tf] with zero
// endpoint velocities; closed-form derivatives make it a clean analytic
// oracle for the expectation quadratures.
struct CubicPath {
  double z0, zf, tf;
  double z(double t) const {
    const double s = t / tf;
    return z0 + (zf - z0) * s * s * (3.0 - 2.0 * s);
  }
  double v(double t) const {
    const double s = t / tf;
    return (zf - z0) * 6.0 * s * (1.0 - s) / tf;
  }
  double a(double t) const {
    const double s = t / tf;
    return (zf - z0) * (6.0 - 12.0 * s) / (tf * tf);
  }
  // invert z(t) = zq by bisection (z is strictly monotone on (0, tf))
  double t_of_z(double zq) const {
    double lo = 0.0, hi = tf;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool below = (z0 > zf) ? (z(mid) > zq) : (z(mid) < zq);
      (below ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

inline Trajectory trajectory_from_path(const CubicPath& c, int n, double alpha = 0.0,
                                       double u = 0.0) {
  Trajectory traj;
  for (int k = 0; k < n; ++k) {
    const double t = c.tf * k / (n - 1);
    traj.t.push_back(t);
    traj.x.push_back({c.z(t), c.v(t), alpha});
    traj.xdot.push_back({c.v(t), c.a(t), 0.0});
    traj.lambda.push_back({0.0, 0.0, 0.0});
    traj.lambda_dot.push_back({0.0, 0.0, 0.0});
    traj.u.push_back(u);
    traj.i.push_back(0.0);
  }
  return traj;
}

// Contact model wrapped around a path: making motion, Gaussian around mu.
inline ContactModel path_contact(const CubicPath& c, double mu, double sigma) {
  ContactModel cm;
  cm.mu_z = mu;
  cm.sigma_z = sigma;
  cm.motion_sign = c.zf < c.z0 ? -1 : 1;
  cm.z_start = c.z0;
  cm.z_end = c.zf;
  cm.t_f = c.tf;
  return cm;
}

}  // namespace testutil
