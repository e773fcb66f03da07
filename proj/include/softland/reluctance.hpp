#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "softland/dual.hpp"

namespace softland {

// Magnetic reluctance of the actuator, split into a gap part R_g(z) and a
// saturable core part R_c(alpha). The default family is
//   R_g(z)     = gap_slope * z,
//   R_c(alpha) = k1 / (1 - k2 |alpha|),   |alpha| < 1/k2,
// which is monotone in the gap and diverges as the core saturates. A
// tabulated family can be plugged in instead; solver code only sees the
// value/derivative interface.
class ReluctanceFamily {
 public:
  enum class Kind { SaturableCore, Tabulated };

  static ReluctanceFamily saturable(double k1, double k2, double gap_slope) {
    if (!(k1 > 0.0) || !(k2 > 0.0) || !(gap_slope > 0.0))
      throw std::invalid_argument("reluctance: k1, k2, gap_slope must be positive");
    ReluctanceFamily r;
    r.kind_ = Kind::SaturableCore;
    r.k1_ = k1;
    r.k2_ = k2;
    r.gap_slope_ = gap_slope;
    return r;
  }

  // Tabulated gap and core reluctances; evaluated with monotone cubic
  // (Fritsch-Carlson) interpolation so first derivatives are exact for the
  // interpolant. The gap table must be strictly increasing in value.
  static ReluctanceFamily tabulated(std::vector<double> z, std::vector<double> rg,
                                    std::vector<double> al, std::vector<double> rc) {
    ReluctanceFamily r;
    r.kind_ = Kind::Tabulated;
    r.gap_tab_ = Pchip(std::move(z), std::move(rg));
    r.core_tab_ = Pchip(std::move(al), std::move(rc));
    for (std::size_t i = 0; i + 1 < r.gap_tab_.y.size(); ++i)
      if (!(r.gap_tab_.y[i + 1] > r.gap_tab_.y[i]))
        throw std::invalid_argument("reluctance: tabulated R_g must be strictly increasing");
    for (double v : r.core_tab_.y)
      if (!(v >= 0.0)) throw std::invalid_argument("reluctance: tabulated R_c must be >= 0");
    return r;
  }

  Kind kind() const { return kind_; }
  double k1() const { return k1_; }
  double k2() const { return k2_; }
  double gap_slope() const { return gap_slope_; }

  // Largest |alpha| the solvers accept; keeps a margin to the saturation pole.
  double flux_limit() const {
    if (kind_ == Kind::SaturableCore) return 0.95 / k2_;
    return core_tab_.x.back();
  }

  template <class T>
  T gap(const T& z) const {
    if (kind_ == Kind::SaturableCore) return gap_slope_ * z;
    return core_eval(gap_tab_, z);
  }

  template <class T>
  T gap_dz(const T& z) const {
    if (kind_ == Kind::SaturableCore) return T(gap_slope_);
    return core_eval_deriv(gap_tab_, z);
  }

  template <class T>
  T core(const T& alpha) const {
    if (kind_ == Kind::SaturableCore) {
      // C1 linear extension beyond the saturation margin keeps Newton iterates
      // finite; accepted solutions must stay below flux_limit().
      const T am = abs(alpha);
      const double alim = 0.95 / k2_;
      if (am > alim) {
        const double s0 = 1.0 - k2_ * alim;
        return k1_ / s0 + k1_ * k2_ / (s0 * s0) * (am - alim);
      }
      const T s = 1.0 - k2_ * am;
      return k1_ / s;
    }
    return core_eval(core_tab_, abs(alpha));
  }

  template <class T>
  T core_dalpha(const T& alpha) const {
    if (kind_ == Kind::SaturableCore) {
      const T am = abs(alpha);
      const double alim = 0.95 / k2_;
      T d(0.0);
      if (am > alim) {
        const double s0 = 1.0 - k2_ * alim;
        d = T(k1_ * k2_ / (s0 * s0));
      } else {
        const T s = 1.0 - k2_ * am;
        d = k1_ * k2_ / (s * s);
      }
      // even in alpha; derivative is odd, zero at alpha = 0
      return value_of(alpha) < 0.0 ? -d : (value_of(alpha) > 0.0 ? d : T(0.0));
    }
    const T d = core_eval_deriv(core_tab_, abs(alpha));
    return value_of(alpha) < 0.0 ? -d : (value_of(alpha) > 0.0 ? d : T(0.0));
  }

 private:
  struct Pchip {
    std::vector<double> x, y, m;  // nodes, values, node slopes
    Pchip() = default;
    Pchip(std::vector<double> xi, std::vector<double> yi) : x(std::move(xi)), y(std::move(yi)) {
      if (x.size() < 2 || x.size() != y.size())
        throw std::invalid_argument("reluctance table needs >= 2 points");
      const std::size_t n = x.size();
      std::vector<double> d(n - 1);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(x[i + 1] > x[i])) throw std::invalid_argument("reluctance table abscissae not increasing");
        d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
      }
      m.assign(n, 0.0);
      m[0] = d[0];
      m[n - 1] = d[n - 2];
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] * d[i] <= 0.0) {
          m[i] = 0.0;
        } else {
          const double w1 = 2.0 * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
          const double w2 = (x[i + 1] - x[i]) + 2.0 * (x[i] - x[i - 1]);
          m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
      }
    }
  };

  template <class T>
  static T core_eval(const Pchip& p, const T& xq) {
    const auto [i, h] = locate(p, value_of(xq));
    const T t = (xq - p.x[i]) / h;
    const T t2 = t * t, t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * p.y[i] + (t3 - 2.0 * t2 + t) * (h * p.m[i]) +
           (-2.0 * t3 + 3.0 * t2) * p.y[i + 1] + (t3 - t2) * (h * p.m[i + 1]);
  }

  template <class T>
  static T core_eval_deriv(const Pchip& p, const T& xq) {
    const auto [i, h] = locate(p, value_of(xq));
    const T t = (xq - p.x[i]) / h;
    const T t2 = t * t;
    return ((6.0 * t2 - 6.0 * t) * p.y[i] + (3.0 * t2 - 4.0 * t + 1.0) * (h * p.m[i]) +
            (-6.0 * t2 + 6.0 * t) * p.y[i + 1] + (3.0 * t2 - 2.0 * t) * (h * p.m[i + 1])) /
           h;
  }

  static std::pair<std::size_t, double> locate(const Pchip& p, double xv) {
    std::size_t i = std::upper_bound(p.x.begin(), p.x.end(), xv) - p.x.begin();
    i = std::clamp<std::size_t>(i, 1, p.x.size() - 1) - 1;
    return {i, p.x[i + 1] - p.x[i]};
  }

  Kind kind_ = Kind::SaturableCore;
  double k1_ = 0.0, k2_ = 0.0, gap_slope_ = 0.0;
  Pchip gap_tab_, core_tab_;
};

}  // namespace softland
