#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "softland/actuator.hpp"
#include "softland/dual.hpp"

namespace softland {

// Distribution of the random contact position Z_c, plus the geometry of the
// motion it is attached to. The Gaussian family is closed-form; a user pdf
// needs value, first derivative and CDF.
struct ContactModel {
  enum class PdfFamily { Gaussian, User };

  PdfFamily family = PdfFamily::Gaussian;
  double mu_z = 0.0;      // [m]
  double sigma_z = 0.0;   // [m]
  int motion_sign = -1;   // sign of V_c; -1 for a making (gap-closing) motion
  double z_start = 0.0;   // z(0)
  double z_end = 0.0;     // z(t_f)
  double t_f = 0.0;       // horizon [s]

  std::function<double(double)> user_pdf;
  std::function<double(double)> user_pdf_dz;
  std::function<double(double)> user_cdf;

  void validate() const {
    if (family == PdfFamily::Gaussian && !(sigma_z > 0.0))
      throw std::invalid_argument("contact model: sigma_z must be > 0");
    if (family == PdfFamily::User && (!user_pdf || !user_pdf_dz || !user_cdf))
      throw std::invalid_argument("contact model: user family needs pdf, pdf_dz and cdf");
    if (motion_sign != -1 && motion_sign != 1)
      throw std::invalid_argument("contact model: motion_sign must be -1 or +1");
    if (!(t_f > 0.0)) throw std::invalid_argument("contact model: t_f must be > 0");
    const double p = contact_probability_constant();
    if (!(p > 0.0 && p <= 1.0 + 1e-12))
      throw std::invalid_argument("contact model: P(0 <= T_c <= t_f) must lie in (0, 1]");
  }

  double pdf(double z) const { return pdf_impl(z); }
  double pdf_dz(double z) const {
    if (family == PdfFamily::Gaussian) {
      const double d = (z - mu_z) / sigma_z;
      return -d / sigma_z * pdf_impl(z);
    }
    return user_pdf_dz(z);
  }

  Dual<double> pdf(const Dual<double>& z) const {
    return {pdf_impl(z.a), pdf_dz(z.a) * z.b};
  }

  double cdf(double z) const {
    if (family == PdfFamily::Gaussian)
      return 0.5 * std::erfc(-(z - mu_z) / (sigma_z * std::sqrt(2.0)));
    return user_cdf(z);
  }

  // P(0 <= T_c <= t_f), computed exactly from the CDF between the endpoint
  // positions; valid for monotone position trajectories.
  double contact_probability_constant() const {
    return std::abs(cdf(z_end) - cdf(z_start));
  }

 private:
  double pdf_impl(double z) const {
    if (family == PdfFamily::Gaussian) {
      const double d = (z - mu_z) / sigma_z;
      return std::exp(-0.5 * d * d) / (sigma_z * std::sqrt(2.0 * M_PI));
    }
    return user_pdf(z);
  }
};

struct BounceConfig {
  enum class Rule { WorstCaseZero, ArgmaxSearch, Restitution };

  Rule rule = Rule::WorstCaseZero;
  double restitution_e = 0.0;   // used by Rule::Restitution
  double kappa = 0.5;           // smooth-saturation sharpness [s^2/m]

  void validate() const {
    if (!(restitution_e >= 0.0 && restitution_e <= 1.0))
      throw std::invalid_argument("bounce: restitution must lie in [0, 1]");
    if (!(kappa > 0.0)) throw std::invalid_argument("bounce: kappa must be > 0");
  }
};

// Acceleration the armature would see immediately after the impact, evaluated
// at the bounced velocity v_b. G_v = 0 for this device, so u drops out.
template <class T>
T bounce_acceleration(const StateT<T>& s, const T& v_b, const T& /*u*/, const ActuatorParams& p) {
  return mechanical_accel(s.z, v_b, s.alpha, p);
}

// Conservative estimate of the post-impact velocity. The worst-case-zero rule
// returns 0 (the friction term makes the bounced acceleration maximal there
// for this device); restitution reflects; the argmax rule searches the
// admissible interval directly and is for reporting, not for optimization.
inline double bounced_velocity(const State& s, double u, const ActuatorParams& p,
                               const BounceConfig& bc, int motion_sign) {
  switch (bc.rule) {
    case BounceConfig::Rule::WorstCaseZero:
      return 0.0;
    case BounceConfig::Rule::Restitution:
      return -bc.restitution_e * s.v;
    case BounceConfig::Rule::ArgmaxSearch: {
      const double lo = std::min(0.0, -s.v);
      const double hi = std::max(0.0, -s.v);
      double best_vb = 0.0;
      double best = -std::numeric_limits<double>::infinity();
      const int n = 400;
      for (int k = 0; k <= n; ++k) {
        const double vb = lo + (hi - lo) * k / n;
        const double obj = -motion_sign * bounce_acceleration<double>(s, vb, u, p);
        if (obj > best) {
          best = obj;
          best_vb = vb;
        }
      }
      return best_vb;
    }
  }
  return 0.0;
}

template <class T>
T bounced_velocity_smooth(const StateT<T>& s, const BounceConfig& bc) {
  if (bc.rule == BounceConfig::Rule::Restitution) return -bc.restitution_e * s.v;
  return T(0.0);  // worst-case-zero; argmax coincides with it for this device
}

/// Smooth version of the take-off/hold saturation:
//   a_b,sat = -s * softplus_kappa(-s * a_b),  s = motion_sign.
// Converges pointwise to the hard rule as kappa grows; corner bias log(2)/kappa.
template <class T>
T saturate_bounce_accel_smooth(const T& a_b, int motion_sign, double kappa) {
  const double s = static_cast<double>(motion_sign);
  return (-s) * softplus((-s) * a_b, kappa);
}

inline double saturate_bounce_accel_hard(double a_b, int motion_sign) {
  return a_b * motion_sign <= 0.0 ? a_b : 0.0;
}

template <class T>
T saturated_bounce_acceleration(const StateT<T>& s, const T& u, const ActuatorParams& p,
                                const ContactModel& cm, const BounceConfig& bc) {
  const T v_b = bounced_velocity_smooth(s, bc);
  const T a_b = bounce_acceleration(s, v_b, u, p);
  return saturate_bounce_accel_smooth(a_b, cm.motion_sign, bc.kappa);
}

inline double saturated_bounce_acceleration_hard(const State& s, double u,
                                                 const ActuatorParams& p, const ContactModel& cm,
                                                 const BounceConfig& bc) {
  const double v_b = bounced_velocity(s, u, p, bc, cm.motion_sign);
  const double a_b = bounce_acceleration<double>(s, v_b, u, p);
  return saturate_bounce_accel_hard(a_b, cm.motion_sign);
}

// f_Tc(t) = |v| f_Zc(z): density of the random contact instant along a
// monotone trajectory.
template <class T>
T contact_time_pdf(const StateT<T>& s, const ContactModel& cm) {
  return abs(s.v) * cm.pdf(s.z);
}

}  // namespace softland
