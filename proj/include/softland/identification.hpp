#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "softland/actuator.hpp"
#include "softland/errors.hpp"
#include "softland/montecarlo.hpp"
#include "softland/sim.hpp"

namespace softland {

// Parameter identification from square-wave voltage/current pulse records:
// resistance and flux-linkage estimation, contact-instant detection from the
// current derivative, a composite cost built from decoupled mechanical and
// electromagnetic sub-simulations, and a derivative-free fit.

// One recorded pulse, uniformly sampled: t_k = k / sample_rate.
struct Pulse {
  std::vector<double> u;  // terminal voltage [V]
  std::vector<double> i;  // coil current [A]
};

struct PulseDataset {
  double sample_rate = 0.0;  // [Hz]
  std::vector<Pulse> pulses;

  double dt() const { return 1.0 / sample_rate; }

  void validate() const {
    if (!(sample_rate > 0.0)) throw std::invalid_argument("dataset: sample_rate must be > 0");
    if (pulses.empty()) throw std::invalid_argument("dataset: no pulses");
    for (const Pulse& p : pulses)
      if (p.u.size() != p.i.size() || p.u.size() < 16)
        throw std::invalid_argument("dataset: each pulse needs >= 16 matched u/i samples");
  }
};

namespace detail {

// Index range [first, last) of the driven (nonzero-voltage) segment.
inline std::pair<std::size_t, std::size_t> on_segment(const Pulse& p) {
  double umax = 0.0;
  for (double u : p.u) umax = std::max(umax, std::abs(u));
  const double thr = 0.5 * umax;
  std::size_t first = p.u.size(), last = 0;
  for (std::size_t k = 0; k < p.u.size(); ++k) {
    if (std::abs(p.u[k]) > thr) {
      first = std::min(first, k);
      last = k + 1;
    }
  }
  if (first >= last) throw std::invalid_argument("pulse: no driven segment found");
  return {first, last};
}

inline double lerp_sample(const std::vector<double>& v, double idx) {
  if (idx <= 0.0) return v.front();
  const std::size_t k = std::min(static_cast<std::size_t>(idx), v.size() - 2);
  const double f = idx - static_cast<double>(k);
  return v[k] + std::min(f, 1.0) * (v[k + 1] - v[k]);
}

}  // namespace detail

// Coil resistance via the zero-net-flux condition: each record starts and
// ends at zero flux linkage, so int (u - R i) dt = 0 over the whole pulse and
// R = int u / int i (trapezoidal), averaged over pulses. Unlike a
// steady-segment fit this is unbiased even when slow pulses are still moving
// near the end of the driven segment.
inline double estimate_resistance(const PulseDataset& ds) {
  ds.validate();
  double sum = 0.0;
  int used = 0;
  for (const Pulse& p : ds.pulses) {
    double su = 0.0, si = 0.0;
    for (std::size_t k = 1; k < p.u.size(); ++k) {
      su += 0.5 * (p.u[k - 1] + p.u[k]);
      si += 0.5 * (p.i[k - 1] + p.i[k]);
    }
    if (si > 0.0) {
      sum += su / si;
      ++used;
    }
  }
  if (used == 0) throw std::invalid_argument("estimate_resistance: no usable pulse");
  return sum / used;
}

// lambda_exp(t) = int_0^t (u - R i) dtau, trapezoidal, zero at pulse start.
// The trace must return near zero once the drive is off and the flux has
// decayed; a large terminal drift signals a wrong R.
inline std::vector<double> estimate_flux_linkage(const Pulse& p, double R, double dt,
                                                 double drift_rel_bound = 0.1) {
  std::vector<double> lam(p.u.size(), 0.0);
  double peak = 0.0;
  for (std::size_t k = 1; k < p.u.size(); ++k) {
    const double e0 = p.u[k - 1] - R * p.i[k - 1];
    const double e1 = p.u[k] - R * p.i[k];
    lam[k] = lam[k - 1] + 0.5 * (e0 + e1) * dt;
    peak = std::max(peak, std::abs(lam[k]));
  }
  if (std::abs(lam.back()) > drift_rel_bound * peak + 1e-12)
    throw DriftExceeded("flux linkage drifts to " + std::to_string(lam.back()) +
                        " Wb-turns at pulse end; resistance estimate is off");
  return lam;
}

// Savitzky-Golay first derivative (quadratic fit, uniform window): for a
// centered window of half-width h the least-squares slope reduces to
// sum_k k x[n+k] / (dt sum_k k^2).
inline std::vector<double> smoothed_derivative(const std::vector<double>& x, double dt,
                                               int window) {
  if (window < 3) window = 3;
  if (window % 2 == 0) ++window;
  const int n = static_cast<int>(x.size());
  window = std::min(window, (n | 1) - 2);
  const int h = window / 2;
  double k2 = 0.0;
  for (int k = 1; k <= h; ++k) k2 += 2.0 * k * k;
  std::vector<double> d(x.size(), 0.0);
  for (int c = h; c + h < n; ++c) {
    double s = 0.0;
    for (int k = 1; k <= h; ++k) s += k * (x[c + k] - x[c - k]);
    d[c] = s / (k2 * dt);
  }
  for (int c = 0; c < h && c < n; ++c) d[c] = d[std::min(h, n - 1)];
  for (int c = std::max(n - h, 0); c < n; ++c) d[c] = d[std::max(n - h - 1, 0)];
  return d;
}

// Contact shows up in the driven current as the derivative swinging abruptly
// from the motional dip back to positive: return the first upward zero
// crossing of the smoothed di/dt after an excursion below -threshold, or
// nothing if the armature never moved.
inline std::optional<double> detect_contact_instant(const Pulse& p, double sample_rate,
                                                    int sg_window = 0,
                                                    double rel_threshold = 0.05) {
  const double dt = 1.0 / sample_rate;
  if (sg_window <= 0) sg_window = std::max(5, static_cast<int>(std::lround(1e-4 * sample_rate)) | 1);
  const auto [first, last] = detail::on_segment(p);
  std::vector<double> seg(p.i.begin() + first, p.i.begin() + last);
  const std::vector<double> d = smoothed_derivative(seg, dt, sg_window);
  double dmax = 0.0;
  for (double v : d) dmax = std::max(dmax, std::abs(v));
  const double thr = rel_threshold * dmax;
  bool dipped = false;
  for (std::size_t k = 1; k < d.size(); ++k) {
    if (d[k] < -thr) dipped = true;
    if (dipped && d[k - 1] < 0.0 && d[k] >= 0.0) {
      const double f = d[k] > d[k - 1] ? -d[k - 1] / (d[k] - d[k - 1]) : 0.0;
      return (static_cast<double>(first + k - 1) + f) * dt;
    }
  }
  return std::nullopt;
}

namespace detail {

struct MechSim {
  std::vector<double> z, v;
  std::optional<double> t_contact;
};

// Mechanical subsystem driven by the measured flux alpha(t) = lambda_exp/N:
// fixed-step RK4 on (z, v) with hard stops at z_min/z_max, latching while the
// net force pushes into the stop.
inline MechSim simulate_mechanical(const ActuatorParams& p, const std::vector<double>& alpha,
                                   double dt, double z0, double v0) {
  const std::size_t n = alpha.size();
  MechSim out;
  out.z.resize(n);
  out.v.resize(n);
  double z = std::clamp(z0, p.z_min, p.z_max), v = v0;
  bool latched = false;
  int latch_side = 0;
  for (std::size_t k = 0; k < n; ++k) {
    out.z[k] = z;
    out.v[k] = v;
    if (k + 1 == n) break;
    const auto alpha_at = [&](double c) { return alpha[k] + c * (alpha[k + 1] - alpha[k]); };
    if (latched) {
      const double z_hold = latch_side < 0 ? p.z_min : p.z_max;
      const double a = mechanical_accel(z_hold, 0.0, alpha_at(0.5), p);
      if ((latch_side < 0 && a > 0.0) || (latch_side > 0 && a < 0.0)) latched = false;
      if (latched) continue;
    }
    const auto acc = [&](double zz, double vv, double c) {
      return mechanical_accel(zz, vv, alpha_at(c), p);
    };
    const double k1z = v, k1v = acc(z, v, 0.0);
    const double k2z = v + 0.5 * dt * k1v, k2v = acc(z + 0.5 * dt * k1z, k2z, 0.5);
    const double k3z = v + 0.5 * dt * k2v, k3v = acc(z + 0.5 * dt * k2z, k3z, 0.5);
    const double k4z = v + dt * k3v, k4v = acc(z + dt * k3z, k4z, 1.0);
    const double z_new = z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    const double v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (z_new <= p.z_min) {
      if (!out.t_contact) {
        const double f = z > p.z_min ? (z - p.z_min) / (z - z_new) : 0.0;
        out.t_contact = (static_cast<double>(k) + f) * dt;
      }
      z = p.z_min;
      v = 0.0;
      latched = true;
      latch_side = -1;
    } else if (z_new >= p.z_max) {
      z = p.z_max;
      v = 0.0;
      latched = true;
      latch_side = 1;
    } else {
      z = z_new;
      v = v_new;
    }
  }
  return out;
}

// Electromagnetic subsystem driven by the simulated motion and the measured
// voltage: RK4 on alpha, output current from the flux equation.
inline std::vector<double> simulate_current(const ActuatorParams& p, const MechSim& mech,
                                            const std::vector<double>& u, double dt,
                                            double alpha0) {
  const std::size_t n = u.size();
  const double g = voltage_gain_alpha(p);
  std::vector<double> i(n, 0.0);
  double alpha = alpha0;
  const auto rate = [&](std::size_t k, double c, double a) {
    const double z = mech.z[k] + c * (mech.z[std::min(k + 1, n - 1)] - mech.z[k]);
    const double uu = u[k] + c * (u[std::min(k + 1, n - 1)] - u[k]);
    return flux_decay(z, a, p) + g * uu;
  };
  for (std::size_t k = 0; k < n; ++k) {
    const double adot = rate(k, 0.0, alpha);
    i[k] = coil_current<double>({mech.z[k], mech.v[k], alpha}, adot, p);
    if (k + 1 == n) break;
    const double k1 = adot;
    const double k2 = rate(k, 0.5, alpha + 0.5 * dt * k1);
    const double k3 = rate(k, 0.5, alpha + 0.5 * dt * k2);
    const double k4 = rate(k, 1.0, alpha + dt * k3);
    alpha += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return i;
}

}  // namespace detail

struct PulseCost {
  double contact_error_s = 0.0;     // t_c,sim - t_c,exp (0 for both-missed)
  double current_residual = 0.0;    // sum (i_sim - i_exp)^2 / sum i_exp^2
  double total = 0.0;
};

// Composite cost of the fitting objective: per pulse, the squared contact
// instant mismatch scaled by t_scale plus the normalized current residual.
// Missing contact instants enter as zero on both sides.
inline PulseCost pulse_cost(const ActuatorParams& params, const Pulse& pulse, double dt,
                            double R_fixed, double t_scale = 3e-3) {
  const std::vector<double> lam = estimate_flux_linkage(pulse, R_fixed, dt);
  std::vector<double> alpha(lam.size());
  for (std::size_t k = 0; k < lam.size(); ++k) alpha[k] = lam[k] / params.N;

  const auto mech = detail::simulate_mechanical(params, alpha, dt, params.z_max, 0.0);
  const std::vector<double> i_sim =
      detail::simulate_current(params, mech, pulse.u, dt, alpha.front());

  const auto t_exp = detect_contact_instant(pulse, 1.0 / dt);
  const double tc_exp = t_exp.value_or(0.0);
  const double tc_sim = mech.t_contact.value_or(0.0);

  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < pulse.i.size(); ++k) {
    num += (i_sim[k] - pulse.i[k]) * (i_sim[k] - pulse.i[k]);
    den += pulse.i[k] * pulse.i[k];
  }
  PulseCost c;
  c.contact_error_s = tc_sim - tc_exp;
  c.current_residual = den > 0.0 ? num / den : 0.0;
  c.total = (c.contact_error_s / t_scale) * (c.contact_error_s / t_scale) + c.current_residual;
  return c;
}

inline double identification_cost(const ActuatorParams& params, const PulseDataset& ds,
                                  double R_fixed, std::vector<PulseCost>* details = nullptr,
                                  int threads = 0) {
  ds.validate();
  const int nthreads = threads > 0
                           ? threads
                           : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<PulseCost> costs(ds.pulses.size());
  const auto worker = [&](int tid) {
    for (std::size_t j = tid; j < ds.pulses.size(); j += nthreads)
      costs[j] = pulse_cost(params, ds.pulses[j], ds.dt(), R_fixed);
  };
  if (nthreads == 1 || ds.pulses.size() == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int tid = 0; tid < nthreads; ++tid) pool.emplace_back(worker, tid);
    for (auto& th : pool) th.join();
  }
  double total = 0.0;
  for (const PulseCost& c : costs) total += c.total;
  if (details) *details = std::move(costs);
  return total;
}

struct FitOptions {
  int max_evals = 3000;
  double ftol = 1e-10;        // relative simplex spread stop
  double log_step = 0.1;      // initial simplex step in log-parameter space
  std::uint64_t seed = 0;     // jitters the initial simplex
  int threads = 0;            // per-pulse parallelism inside the cost
  double t_scale = 3e-3;
  // if finite, failing to reach it within max_evals raises BudgetExhausted
  double target_cost = std::numeric_limits<double>::infinity();
};

struct FitReport {
  ActuatorParams params;
  double R = 0.0;
  double cost = std::numeric_limits<double>::infinity();
  double initial_cost = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  std::vector<double> trace;  // best cost after each evaluation (non-increasing)
  std::vector<PulseCost> pulse_details;
};

namespace detail {

inline ActuatorParams apply_log_params(const ActuatorParams& base,
                                       const std::array<double, 7>& x) {
  ActuatorParams p = base;
  p.m = std::exp(x[0]);
  p.k_s = std::exp(x[1]);
  p.z_s = std::exp(x[2]);
  p.c_f = std::exp(x[3]);
  p.reluctance = ReluctanceFamily::saturable(std::exp(x[4]), std::exp(x[5]),
                                             base.reluctance.gap_slope());
  p.k_ec = std::exp(x[6]);
  return p;
}

inline std::array<double, 7> to_log_params(const ActuatorParams& p) {
  return {std::log(p.m),      std::log(p.k_s),
          std::log(p.z_s),    std::log(p.c_f),
          std::log(p.reluctance.k1()), std::log(p.reluctance.k2()),
          std::log(p.k_ec)};
}

}  // namespace detail

// Nelder-Mead over log-scaled {m, k_s, z_s, c_f, k_1, k_2, k_ec}; R is fixed
// from the steady-segment estimate. Parameter sets whose simulation throws
// evaluate to +infinity.
inline FitReport fit(const PulseDataset& ds, const ActuatorParams& initial,
                     const FitOptions& opts = {}) {
  ds.validate();
  const double R = estimate_resistance(ds);

  FitReport rep;
  rep.R = R;

  using X = std::array<double, 7>;
  const auto objective = [&](const X& x) {
    ++rep.evaluations;
    double c;
    try {
      c = identification_cost(detail::apply_log_params(initial, x), ds, R, nullptr,
                              opts.threads);
      if (!std::isfinite(c)) c = std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      c = std::numeric_limits<double>::infinity();
    }
    rep.trace.push_back(std::min(c, rep.trace.empty() ? c : rep.trace.back()));
    return c;
  };

  constexpr int n = 7;
  std::vector<X> xs(n + 1);
  std::vector<double> fs(n + 1);
  xs[0] = detail::to_log_params(initial);
  fs[0] = objective(xs[0]);
  rep.initial_cost = fs[0];
  for (int j = 0; j < n; ++j) {
    xs[j + 1] = xs[0];
    const double jitter = 0.5 + rng::uniform01(opts.seed, static_cast<std::uint64_t>(j), 7);
    xs[j + 1][j] += opts.log_step * jitter;
    fs[j + 1] = objective(xs[j + 1]);
  }

  const auto order = [&]() {
    std::vector<int> idx(n + 1);
    for (int k = 0; k <= n; ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<X> xs2(n + 1);
    std::vector<double> fs2(n + 1);
    for (int k = 0; k <= n; ++k) {
      xs2[k] = xs[idx[k]];
      fs2[k] = fs[idx[k]];
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };

  while (rep.evaluations < opts.max_evals) {
    order();
    if (std::isfinite(fs[0]) &&
        fs[n] - fs[0] <= opts.ftol * (std::abs(fs[0]) + 1e-300))
      break;
    X centroid{};
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) centroid[j] += xs[k][j] / n;
    const auto blend = [&](double coef) {
      X x;
      for (int j = 0; j < n; ++j) x[j] = centroid[j] + coef * (xs[n][j] - centroid[j]);
      return x;
    };
    const X xr = blend(-1.0);
    const double fr = objective(xr);
    if (fr < fs[0]) {
      const X xe = blend(-2.0);
      const double fe = objective(xe);
      if (fe < fr) {
        xs[n] = xe;
        fs[n] = fe;
      } else {
        xs[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      const X xc = blend(fr < fs[n] ? -0.5 : 0.5);
      const double fc = objective(xc);
      if (fc < std::min(fr, fs[n])) {
        xs[n] = xc;
        fs[n] = fc;
      } else {
        for (int k = 1; k <= n; ++k) {
          for (int j = 0; j < n; ++j) xs[k][j] = xs[0][j] + 0.5 * (xs[k][j] - xs[0][j]);
          fs[k] = objective(xs[k]);
          if (rep.evaluations >= opts.max_evals) break;
        }
      }
    }
  }
  order();

  rep.params = detail::apply_log_params(initial, xs[0]);
  rep.cost = identification_cost(rep.params, ds, R, &rep.pulse_details, opts.threads);
  if (rep.cost > opts.target_cost)
    throw BudgetExhausted("fit: best cost " + std::to_string(rep.cost) +
                          " above target after " + std::to_string(rep.evaluations) +
                          " evaluations");
  return rep;
}

// Synthetic dataset: square voltage pulses through the hybrid simulator with
// the seat at z_min, resampled onto the uniform acquisition grid.
struct SyntheticProtocol {
  int n_pulses = 26;
  double u_low = 25.0;        // [V] span of pulse amplitudes (low end: no motion)
  double u_high = 50.0;       // [V]
  double t_on = 15e-3;        // [s]
  double t_off = 15e-3;       // [s]
  double sample_rate = 1e6;   // [Hz]
};

inline PulseDataset generate_synthetic_dataset(const ActuatorParams& p,
                                               const SyntheticProtocol& proto = {}) {
  if (proto.n_pulses < 1) throw std::invalid_argument("synthetic: n_pulses must be >= 1");
  PulseDataset ds;
  ds.sample_rate = proto.sample_rate;
  const double dt = 1.0 / proto.sample_rate;
  const double t_end = proto.t_on + proto.t_off;
  const std::size_t n = static_cast<std::size_t>(std::floor(t_end / dt)) + 1;

  SimOptions sim;
  sim.max_dt = dt;
  for (int j = 0; j < proto.n_pulses; ++j) {
    const double amp = proto.n_pulses == 1
                           ? proto.u_high
                           : proto.u_low + (proto.u_high - proto.u_low) * j / (proto.n_pulses - 1);
    DriveSignal drive{DriveSignal::Kind::Voltage,
                      {0.0, proto.t_on, proto.t_on + 0.25 * dt, t_end},
                      {amp, amp, 0.0, 0.0}};
    const SimResult r = integrate(p, drive, p.z_min, t_end, sim);
    Pulse pulse;
    pulse.u.resize(n);
    pulse.i.resize(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double t = k * dt;
      while (seg + 2 < r.t.size() && r.t[seg + 1] < t) ++seg;
      const double f =
          std::clamp((t - r.t[seg]) / std::max(r.t[seg + 1] - r.t[seg], 1e-300), 0.0, 1.0);
      pulse.u[k] = drive(t);  // the commanded voltage is known exactly
      pulse.i[k] = r.i[seg] + f * (r.i[seg + 1] - r.i[seg]);
    }
    ds.pulses.push_back(std::move(pulse));
  }
  return ds;
}

}  // namespace softland
