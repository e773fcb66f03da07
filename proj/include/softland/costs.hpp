#pragma once

#include <cmath>
#include <stdexcept>

#include "softland/contact.hpp"
#include "softland/errors.hpp"
#include "softland/expectations.hpp"

namespace softland {

struct CostWeights {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;

  void validate(bool pos_mode) const {
    if (!(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0))
      throw std::invalid_argument("cost weights must be >= 0");
    if (pos_mode && !(w1 > 0.0 || w2 > 0.0 || w3 > 0.0))
      throw std::invalid_argument("cost weights must not all be zero");
  }
};

// V_1 = w1 v^2 f_Zc(z) / P: running-cost form of the expected contact speed.
template <class T>
T v1_rate(const StateT<T>& s, const ContactModel& cm, const CostWeights& w) {
  const double p = cm.contact_probability_constant();
  return w.w1 * s.v * s.v * cm.pdf(s.z) / p;
}

// V_2 = -w2 v a_b,sat f_Zc(z) / P: expected bounced acceleration penalty;
// uses the smooth saturation so it stays differentiable for the costates.
template <class T>
T v2_rate(const StateT<T>& s, const T& u, const ContactModel& cm, const ActuatorParams& p,
          const BounceConfig& bc, const CostWeights& w) {
  const double prob = cm.contact_probability_constant();
  const T a_sat = saturated_bounce_acceleration(s, u, p, cm, bc);
  return (-w.w2) * s.v * a_sat * cm.pdf(s.z) / prob;
}

// V_3 = w3 (di/dt)^2 with the k_ec = 0 approximation of the current
// derivative; quadratic in u, which regularizes the Hamiltonian.
template <class T>
T v3_rate(const StateT<T>& s, const T& u, const ActuatorParams& p, const CostWeights& w) {
  if (w.w3 > 0.0 && !(voltage_gain_alpha(p) != 0.0))
    throw DegenerateRegularization("G_alpha = 0 makes the regularization independent of u");
  const AffineRate<T> r = current_rate_coeffs(s, p);
  const T didt = r.c0 + r.c1 * u;
  return w.w3 * didt * didt;
}

// Energy-optimal running cost: u^2.
template <class T>
T v_eos_rate(const T& u) {
  return u * u;
}

struct CostBreakdown {
  double j1 = 0.0, j2 = 0.0, j3 = 0.0, j_eos = 0.0;
  double total() const { return j1 + j2 + j3 + j_eos; }
};

// Quadrature of the active running-cost terms over a trajectory. POS terms
// are active when their weight is nonzero; eos adds the u^2 energy term.
inline CostBreakdown total_cost(const Trajectory& traj, const ControlFn& control,
                                const ContactModel& cm, const ActuatorParams& p,
                                const BounceConfig& bc, const CostWeights& w,
                                bool include_eos = false) {
  CostBreakdown out;
  if (w.w1 > 0.0)
    out.j1 = detail::integrate_on_mesh(traj, [&](double t) {
      return v1_rate(traj.state_at(t), cm, w);
    });
  if (w.w2 > 0.0)
    out.j2 = detail::integrate_on_mesh(traj, [&](double t) {
      return v2_rate(traj.state_at(t), control(t), cm, p, bc, w);
    });
  if (w.w3 > 0.0)
    out.j3 = detail::integrate_on_mesh(traj, [&](double t) {
      return v3_rate(traj.state_at(t), control(t), p, w);
    });
  if (include_eos)
    out.j_eos = detail::integrate_on_mesh(traj, [&](double t) {
      const double u = control(t);
      return u * u;
    });
  return out;
}

}  // namespace softland
