#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>

#include "softland/contact.hpp"
#include "softland/errors.hpp"
#include "softland/trajectory.hpp"

namespace softland {

using ControlFn = std::function<double(double)>;

namespace detail {

// Adaptive Gauss-Kronrod, applied interval-by-interval on the solver mesh so
// the interpolant stays local. The integrands are smooth but sharply peaked
// near mu_z.
template <class F>
double integrate_on_mesh(const Trajectory& traj, F&& f, double tol = 1e-10) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < traj.t.size(); ++k)
    total += GK::integrate(f, traj.t[k], traj.t[k + 1], 10, tol);
  return total;
}

inline double checked_probability(const ContactModel& cm) {
  const double p = cm.contact_probability_constant();
  if (!(p > 1e-12))
    throw ZeroContactProbability("contact probability below 1e-12");
  return p;
}

}  // namespace detail

// P_c(t) = |integral of f_Zc between z(0) and z(t)|; exact via the CDF for
// monotone position channels.
inline double contact_probability_by(const Trajectory& traj, double t, const ContactModel& cm) {
  checked_motion_sign(traj);
  const double z0 = traj.x.front().z;
  const double zt = traj.state_at(t).z;
  return std::abs(cm.cdf(zt) - cm.cdf(z0));
}

// E[V_c] = (1/P) int v |v| f_Zc(z) dt.
inline double expected_contact_velocity(const Trajectory& traj, const ContactModel& cm) {
  checked_motion_sign(traj);
  const double p = detail::checked_probability(cm);
  const double val = detail::integrate_on_mesh(traj, [&](double t) {
    const State s = traj.state_at(t);
    return s.v * std::abs(s.v) * cm.pdf(s.z);
  });
  return val / p;
}

// E[A_c] = (1/P) int |v| a_b,sat f_Zc(z) dt. The hard saturation rule is the
// reporting default; pass hard = false to integrate the smooth surrogate used
// inside the optimization.
inline double expected_contact_acceleration(const Trajectory& traj, const ControlFn& control,
                                            const ContactModel& cm, const ActuatorParams& p,
                                            const BounceConfig& bc, bool hard = true) {
  checked_motion_sign(traj);
  const double prob = detail::checked_probability(cm);
  const double val = detail::integrate_on_mesh(traj, [&](double t) {
    const State s = traj.state_at(t);
    const double u = control(t);
    const double a_sat = hard ? saturated_bounce_acceleration_hard(s, u, p, cm, bc)
                              : saturated_bounce_acceleration<double>(s, u, p, cm, bc);
    return std::abs(s.v) * a_sat * cm.pdf(s.z);
  });
  return val / prob;
}

}  // namespace softland
