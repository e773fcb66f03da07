#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "softland/actuator.hpp"
#include "softland/contact.hpp"
#include "softland/costs.hpp"
#include "softland/dual.hpp"
#include "softland/errors.hpp"

namespace softland {

enum class Mode { POS, EOS };

struct ContinuationStage {
  double sigma_scale = 1.0;   // multiplies sigma_z
  double weight_scale = 1.0;  // multiplies w1 and w2 (w3 stays, it regularizes)
  double beta_scale = 1.0;    // multiplies the clamp sharpness
  double u_effort = 0.0;      // absolute u^2 penalty, annealed to 0 [V^-2 s^-1]
};

struct SolverOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  int max_mesh = 10000;
  int max_newton = 60;
  double newton_damping_floor = 1.0 / 64.0;
  double clamp_sharpness_beta = 2.0;  // [1/V]
  int initial_mesh = 80;
  std::vector<ContinuationStage> continuation_schedule;  // empty = single plain solve
  bool verbose = false;

  void validate() const {
    if (!(rel_tol > 0.0 && abs_tol > 0.0)) throw std::invalid_argument("solver: tolerances must be > 0");
    if (!(newton_damping_floor > 0.0 && newton_damping_floor <= 1.0))
      throw std::invalid_argument("solver: damping floor must lie in (0, 1]");
    if (!continuation_schedule.empty() &&
        (continuation_schedule.back().sigma_scale != 1.0 ||
         continuation_schedule.back().weight_scale != 1.0 ||
         continuation_schedule.back().u_effort != 0.0))
      throw std::invalid_argument("solver: continuation schedule must end at scale 1");
  }
};

// Full statement of one soft-landing design problem.
struct OcpSpec {
  Mode mode = Mode::POS;
  ActuatorParams params;
  ContactModel contact;
  CostWeights weights;
  BounceConfig bounce;
  SolverOptions solver;
  double u_minus = 0.0;  // [V]
  double u_plus = 0.0;   // [V]
  double z_0 = 0.0;      // [m]
  double z_f = 0.0;      // [m]
  double t_f = 0.0;      // [s]
  // Homotopy-only u^2 penalty; keeps intermediate solves in the low-effort
  // solution branch and must be zero for the problem actually posed.
  double u_effort_reg = 0.0;

  void validate() const {
    params.validate();
    bounce.validate();
    solver.validate();
    if (!(u_minus < u_plus)) throw std::invalid_argument("ocp: u_minus must be < u_plus");
    if (!(t_f > 0.0)) throw std::invalid_argument("ocp: t_f must be > 0");
    if (z_0 == z_f) throw std::invalid_argument("ocp: z_0 must differ from z_f");
    if (mode == Mode::POS) {
      contact.validate();
      weights.validate(true);
      if (!(weights.w3 > 0.0))
        throw DegenerateRegularization("POS mode requires w3 > 0");
    }
  }
};

// Tightest voltage bounds that keep the designed current reachable for any
// real resistance in [R_min, R_max]:
//   u_+ = u_max R / R_max,  u_- = u_min + u_+ (R - R_min) / R.
inline std::pair<double, double> control_bounds(double u_min, double u_max, double R,
                                                double R_min, double R_max) {
  if (!(0.0 < R_min && R_min <= R && R <= R_max))
    throw std::invalid_argument("control_bounds: need 0 < R_min <= R <= R_max");
  if (!(u_min < 0.0 && 0.0 < u_max))
    throw std::invalid_argument("control_bounds: need u_min < 0 < u_max");
  const double u_plus = u_max * R / R_max;
  const double u_minus = u_min + u_plus * (R - R_min) / R;
  if (!(u_minus < u_plus)) throw InfeasibleBounds("control_bounds: empty voltage interval");
  return {u_minus, u_plus};
}

template <class T>
T running_cost(const StateT<T>& s, const T& u, const OcpSpec& spec) {
  if (spec.mode == Mode::EOS) return u * u;
  T val = T(0.0);
  if (spec.weights.w1 > 0.0) val = val + v1_rate(s, spec.contact, spec.weights);
  if (spec.weights.w2 > 0.0)
    val = val + v2_rate(s, u, spec.contact, spec.params, spec.bounce, spec.weights);
  val = val + v3_rate(s, u, spec.params, spec.weights);
  if (spec.u_effort_reg > 0.0) val = val + spec.u_effort_reg * u * u;
  return val;
}

// H = V + lambda . (f + G u).
template <class T>
T hamiltonian(const StateT<T>& s, const std::array<double, 3>& lam, const T& u,
              const OcpSpec& spec) {
  const StateT<T> f = drift(s, spec.params);
  const double g_alpha = voltage_gain_alpha(spec.params);
  return running_cost(s, u, spec) + lam[0] * f.z + lam[1] * f.v +
         lam[2] * (f.alpha + g_alpha * u);
}

// Coefficients of H as a polynomial in u: H = quad u^2 + lin u + const.
template <class T>
struct HamiltonianUPoly {
  T quad{}, lin{};
};

template <class T>
HamiltonianUPoly<T> hamiltonian_u_poly(const StateT<T>& s, const std::array<double, 3>& lam,
                                       const OcpSpec& spec) {
  const double g_alpha = voltage_gain_alpha(spec.params);
  if (spec.mode == Mode::EOS) return {T(1.0), T(lam[2] * g_alpha)};
  const AffineRate<T> r = current_rate_coeffs(s, spec.params);
  const double w3 = spec.weights.w3;
  return {w3 * r.c1 * r.c1 + spec.u_effort_reg,
          2.0 * w3 * r.c0 * r.c1 + lam[2] * g_alpha};
}

// q*: unconstrained stationary point of H over u, from the exact ratio of the
// two polynomial coefficients of dH/du.
template <class T>
T stationary_control(const StateT<T>& s, const std::array<double, 3>& lam, const OcpSpec& spec) {
  const HamiltonianUPoly<T> h = hamiltonian_u_poly(s, lam, spec);
  if (!(value_of(h.quad) > 0.0))
    throw DegenerateRegularization("quadratic u-coefficient of H is not positive");
  return -h.lin / (2.0 * h.quad);
}

// Differentiable saturation of q* into [u_-, u_+] via a softplus blend.
template <class T>
T smooth_clamp(const T& q, double lo, double hi, double beta) {
  return lo + softplus(q - lo, beta) - softplus(q - hi, beta);
}

template <class T>
T optimal_control(const StateT<T>& s, const std::array<double, 3>& lam, const OcpSpec& spec) {
  const T q = stationary_control(s, lam, spec);
  return smooth_clamp(q, spec.u_minus, spec.u_plus,
                      spec.solver.clamp_sharpness_beta);
}

// Hard clamp; for reporting and brute-force checks only.
inline double optimal_control_hard(const State& s, const std::array<double, 3>& lam,
                                   const OcpSpec& spec) {
  const double q = stationary_control(s, lam, spec);
  return std::clamp(q, spec.u_minus, spec.u_plus);
}

// lambda' = -dH/dx evaluated through the full composite u*(x, lambda); forward
// duals make the gradient exact, so the envelope shortcut is recovered
// automatically wherever u* is interior.
inline std::array<double, 3> costate_rhs(const State& s, const std::array<double, 3>& lam,
                                         const OcpSpec& spec) {
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    StateT<Dual<double>> sd{{s.z, 0.0}, {s.v, 0.0}, {s.alpha, 0.0}};
    (k == 0 ? sd.z : k == 1 ? sd.v : sd.alpha).b = 1.0;
    const Dual<double> u = optimal_control(sd, lam, spec);
    const Dual<double> h = hamiltonian(sd, lam, u, spec);
    out[k] = -h.b;
  }
  return out;
}

// Combined BVP right-hand side over y = (z, v, alpha, lambda1, lambda2,
// lambda3): x' = f + G u*(x, lambda), lambda' = -dH/dx.
inline void pmp_rhs(const double* y, double* dy, const OcpSpec& spec) {
  const State s{y[0], y[1], y[2]};
  const std::array<double, 3> lam{y[3], y[4], y[5]};
  const double u = optimal_control<double>(s, lam, spec);
  const State f = drift(s, spec.params);
  dy[0] = f.z;
  dy[1] = f.v;
  dy[2] = f.alpha + voltage_gain_alpha(spec.params) * u;
  const auto ld = costate_rhs(s, lam, spec);
  dy[3] = ld[0];
  dy[4] = ld[1];
  dy[5] = ld[2];
}

// 2n = 6 boundary residuals. Both modes start from rest with zero initial
// acceleration (which pins the initial flux through the force balance) and
// end at z_f; POS leaves the terminal state free through the costates, EOS
// forces terminal velocity and acceleration to zero.
inline std::array<double, 6> boundary_residuals(Mode mode, const State& x0, const State& xf,
                                                const std::array<double, 3>& lam_f,
                                                const OcpSpec& spec) {
  std::array<double, 6> r{};
  r[0] = x0.z - spec.z_0;
  r[1] = x0.v;
  r[2] = mechanical_accel(x0.z, x0.v, x0.alpha, spec.params);
  r[3] = xf.z - spec.z_f;
  if (mode == Mode::POS) {
    r[4] = lam_f[1];
    r[5] = lam_f[2];
  } else {
    r[4] = xf.v;
    r[5] = mechanical_accel(xf.z, xf.v, xf.alpha, spec.params);
  }
  return r;
}

// Initial flux fixed by the zero-acceleration boundary condition:
// (1/2) dR_g/dz alpha^2 = k_s (z_s - z).
inline double force_balance_flux(double z, const ActuatorParams& p) {
  const double num = 2.0 * p.k_s * (p.z_s - z);
  const double den = p.reluctance.gap_dz(z);
  return num > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace softland
