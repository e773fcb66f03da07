#pragma once

#include <cmath>
#include <stdexcept>

#include "softland/dual.hpp"
#include "softland/reluctance.hpp"

namespace softland {

template <class T>
struct StateT {
  T z{};      // armature position [m]
  T v{};      // velocity [m/s]
  T alpha{};  // magnetic flux [Wb]
};
using State = StateT<double>;

// Lumped-parameter constants of the solenoid valve plus the reluctance family.
struct ActuatorParams {
  double R = 0.0;       // coil resistance [ohm]
  double N = 0.0;       // coil turns
  double m = 0.0;       // movable mass [kg]
  double k_s = 0.0;     // spring stiffness [N/m]
  double z_s = 0.0;     // spring rest position [m]
  double c_f = 0.0;     // friction coefficient [N s/m]
  double k_ec = 0.0;    // eddy-current constant [1/ohm]
  double z_min = 0.0;   // minimum gap [m]
  double z_max = 0.0;   // maximum gap [m]
  ReluctanceFamily reluctance;

  void validate() const {
    if (!(m > 0.0 && k_s > 0.0 && c_f > 0.0 && N > 0.0 && R > 0.0))
      throw std::invalid_argument("actuator: m, k_s, c_f, N, R must be strictly positive");
    if (!(k_ec >= 0.0)) throw std::invalid_argument("actuator: k_ec must be >= 0");
    if (!(z_min < z_max)) throw std::invalid_argument("actuator: z_min must be < z_max");
  }

  // Commercial solenoid valve used throughout the tests and bundled configs.
  static ActuatorParams reference_valve() {
    ActuatorParams p;
    p.R = 50.0;
    p.N = 1.20e3;
    p.m = 1.63e-3;
    p.k_s = 6.18e1;
    p.z_s = 1.92e-2;
    p.c_f = 8.06e-1;
    p.k_ec = 1.63e3;
    p.z_min = 3.99e-4;
    p.z_max = 1.60e-3;
    // Default gap slope: strong enough that the coil wins against the spring
    // over the whole stroke at the upper voltage bound, while a 25 V hold is
    // not enough to start the motion.
    p.reluctance = ReluctanceFamily::saturable(4.41e6, 3.80e4, 8.0e10);
    return p;
  }
};

// f_v(z, v, alpha): spring, viscous friction and magnetic force over mass.
template <class T>
T mechanical_accel(const T& z, const T& v, const T& alpha, const ActuatorParams& p) {
  const T fmag = 0.5 * p.reluctance.gap_dz(z) * alpha * alpha;
  return (p.k_s * (p.z_s - z) - p.c_f * v - fmag) / p.m;
}

// f_alpha(z, alpha): resistive flux decay including the eddy-current path.
template <class T>
T flux_decay(const T& z, const T& alpha, const ActuatorParams& p) {
  const T rsum = p.reluctance.core(alpha) + p.reluctance.gap(z);
  return -(p.R * rsum * alpha) / (p.N * p.N + p.R * p.k_ec);
}

// Drift f(x) of the affine dynamics x' = f(x) + G(x) u.
template <class T>
StateT<T> drift(const StateT<T>& s, const ActuatorParams& p) {
  return {s.v, mechanical_accel(s.z, s.v, s.alpha, p), flux_decay(s.z, s.alpha, p)};
}

inline double voltage_gain_alpha(const ActuatorParams& p) {
  return p.N / (p.N * p.N + p.R * p.k_ec);
}

// Input gain G(x) = (0, 0, G_alpha); constant in the state for this device.
template <class T>
StateT<T> input_gain(const StateT<T>&, const ActuatorParams& p) {
  return {T(0.0), T(0.0), T(voltage_gain_alpha(p))};
}

// Coil current output map: i = ((R_c + R_g) alpha + k_ec alpha') / N. This is
// the unique form consistent with both the flux dynamics above and the coil
// terminal law u = R i + N alpha'; the eddy path contributes the alpha' term.
template <class T>
T coil_current(const StateT<T>& s, const T& alpha_dot, const ActuatorParams& p) {
  const T rsum = p.reluctance.core(s.alpha) + p.reluctance.gap(s.z);
  return (rsum * s.alpha + p.k_ec * alpha_dot) / p.N;
}

// Inverse of the output map: flux rate that produces current i. Requires
// k_ec > 0; used by the current-driven simulation path.
template <class T>
T flux_rate_from_current(const StateT<T>& s, const T& i, const ActuatorParams& p) {
  if (!(p.k_ec > 0.0))
    throw std::invalid_argument("current drive requires k_ec > 0");
  const T rsum = p.reluctance.core(s.alpha) + p.reluctance.gap(s.z);
  return (p.N * i - rsum * s.alpha) / p.k_ec;
}

// di/dt with the k_ec = 0 approximation, split affinely in u:
//   di/dt = c0(x) + c1(x) u.
template <class T>
struct AffineRate {
  T c0{}, c1{};
};

template <class T>
AffineRate<T> current_rate_coeffs(const StateT<T>& s, const ActuatorParams& p) {
  const auto& rel = p.reluctance;
  const T a_coef = (rel.core_dalpha(s.alpha) * s.alpha + rel.core(s.alpha) + rel.gap(s.z)) / p.N;
  const T moving = rel.gap_dz(s.z) * s.v * s.alpha / p.N;
  const T fdec = flux_decay(s.z, s.alpha, p);
  const double g = voltage_gain_alpha(p);
  return {moving + a_coef * fdec, a_coef * g};
}

// di/dt along the dynamics. With approx_kec_zero the k_ec * alpha'' term is
// dropped; the full value needs alpha'' supplied by the caller.
template <class T>
T current_derivative(const StateT<T>& s, const T& u, const ActuatorParams& p,
                     bool approx_kec_zero = true, const T& alpha_ddot = T(0.0)) {
  const AffineRate<T> r = current_rate_coeffs(s, p);
  T didt = r.c0 + r.c1 * u;
  if (!approx_kec_zero) didt = didt + p.k_ec * alpha_ddot / p.N;
  return didt;
}

}  // namespace softland
