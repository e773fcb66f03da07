#pragma once

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "softland/actuator.hpp"
#include "softland/contact.hpp"
#include "softland/errors.hpp"
#include "softland/trajectory.hpp"

namespace softland {

// Piecewise-linear drive signal with optional constant-slope ramps from and
// back to zero outside the sampled window.
struct DriveSignal {
  enum class Kind { Voltage, Current };

  Kind kind = Kind::Voltage;
  std::vector<double> t;      // strictly increasing sample times [s]
  std::vector<double> value;  // [V] or [A]
  double pre_ramp = 0.0;      // [s]
  double post_ramp = 0.0;     // [s]

  void validate() const {
    if (t.size() != value.size() || t.size() < 2)
      throw std::invalid_argument("drive: need >= 2 samples with matching times");
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
      if (!(t[k + 1] > t[k])) throw std::invalid_argument("drive: times must strictly increase");
    if (pre_ramp < 0.0 || post_ramp < 0.0)
      throw std::invalid_argument("drive: ramp durations must be >= 0");
  }

  double operator()(double time) const {
    if (time <= t.front()) {
      if (pre_ramp <= 0.0 || time <= t.front() - pre_ramp) return time < t.front() ? 0.0 : value.front();
      return value.front() * (time - (t.front() - pre_ramp)) / pre_ramp;
    }
    if (time >= t.back()) {
      if (post_ramp <= 0.0 || time >= t.back() + post_ramp) return time > t.back() ? 0.0 : value.back();
      return value.back() * (1.0 - (time - t.back()) / post_ramp);
    }
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double s = (time - t[k]) / (t[k + 1] - t[k]);
    return value[k] + s * (value[k + 1] - value[k]);
  }

  static DriveSignal constant_voltage(double u, double t_end) {
    return {Kind::Voltage, {0.0, t_end}, {u, u}};
  }
  static DriveSignal constant_current(double i, double t_end) {
    return {Kind::Current, {0.0, t_end}, {i, i}};
  }
  static DriveSignal voltage_from(const Trajectory& traj) {
    return {Kind::Voltage, traj.t, traj.u};
  }
  static DriveSignal current_from(const Trajectory& traj) {
    return {Kind::Current, traj.t, traj.i};
  }
};

struct SimOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double event_tol_t = 1e-9;   // [s] contact instant localization
  double restitution = 0.0;    // seat/stop coefficient of restitution
  double v_latch = 1e-6;       // [m/s] below this an impact sticks
  double max_dt = 5e-5;        // [s] observer resolution bound
};

struct SimResult {
  std::vector<double> t;
  std::vector<State> x;
  std::vector<double> u;  // coil terminal voltage
  std::vector<double> i;  // coil current

  bool contacted = false;
  double t_contact = std::numeric_limits<double>::quiet_NaN();
  double v_contact = 0.0;       // armature velocity just before first seat impact
  double a_bounce_sat = 0.0;    // hard-saturated bounce acceleration at first impact
  int bounce_count = 0;         // seat impacts after the first
  double energy_mJ = 0.0;       // int u^2/R dt
  double energy_ui_mJ = 0.0;    // int u*i dt

  double final_z() const { return x.back().z; }
};

namespace detail {

struct SimChannels {
  double u, i, alpha_dot;
};

inline SimChannels drive_channels(const State& s, double time, const DriveSignal& drive,
                                  const ActuatorParams& p) {
  if (drive.kind == DriveSignal::Kind::Voltage) {
    const double u = drive(time);
    const double adot = flux_decay(s.z, s.alpha, p) + voltage_gain_alpha(p) * u;
    return {u, coil_current<double>(s, adot, p), adot};
  }
  const double i = drive(time);
  const double adot = flux_rate_from_current(s, i, p);
  // terminal voltage consistent with the flux equation
  const double rel = p.reluctance.core(s.alpha) + p.reluctance.gap(s.z);
  const double u = (adot * (p.N * p.N + p.R * p.k_ec) + p.R * rel * s.alpha) / p.N;
  return {u, i, adot};
}

}  // namespace detail

// Hybrid forward simulation: free flight between the sampled seat position
// z_c and the open stop z_max, impacts mapped through the restitution law,
// rest contact handled as a latched mode that releases when the net force
// reverses. Deterministic for a given drive and options.
inline SimResult integrate(const ActuatorParams& p, const DriveSignal& drive, double z_c,
                           double t_end, const SimOptions& opts = {},
                           const std::optional<State>& x0 = {}) {
  using namespace boost::numeric::odeint;
  drive.validate();
  p.validate();
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
  if (!(z_c < p.z_max)) throw std::invalid_argument("integrate: z_c must lie below z_max");
  if (drive.kind == DriveSignal::Kind::Current && !(p.k_ec > 0.0))
    throw std::invalid_argument("integrate: current drive requires k_ec > 0");

  using Y = std::array<double, 3>;
  enum class Mode { Free, LatchedLow, LatchedHigh };

  State s0 = x0.value_or(State{p.z_max, 0.0, 0.0});
  s0.z = std::clamp(s0.z, z_c, p.z_max);
  Y y{s0.z, s0.v, s0.alpha};

  SimResult res;
  const auto record = [&](double time, const Y& yy) {
    const State s{yy[0], yy[1], yy[2]};
    const auto ch = detail::drive_channels(s, time, drive, p);
    if (!res.t.empty() && time <= res.t.back()) return;
    res.t.push_back(time);
    res.x.push_back(s);
    res.u.push_back(ch.u);
    res.i.push_back(ch.i);
  };

  Mode mode = Mode::Free;
  {
    const double a0 = mechanical_accel(y[0], y[1], y[2], p);
    if (y[0] >= p.z_max && a0 >= 0.0 && y[1] >= 0.0) mode = Mode::LatchedHigh;
    if (y[0] <= z_c && a0 <= 0.0 && y[1] <= 0.0) mode = Mode::LatchedLow;
  }

  const auto free_rhs = [&](const Y& yy, Y& dy, double time) {
    const State s{yy[0], yy[1], yy[2]};
    dy[0] = s.v;
    dy[1] = mechanical_accel(s.z, s.v, s.alpha, p);
    dy[2] = detail::drive_channels(s, time, drive, p).alpha_dot;
  };
  const auto latched_rhs = [&](const Y& yy, Y& dy, double time) {
    const State s{yy[0], 0.0, yy[2]};
    dy[0] = 0.0;
    dy[1] = 0.0;
    dy[2] = detail::drive_channels(s, time, drive, p).alpha_dot;
  };

  double time = 0.0;
  record(time, y);

  auto stepper = make_dense_output(opts.abs_tol, opts.rel_tol, runge_kutta_dopri5<Y>());

  const auto handle_seat_impact = [&](double t_ev, Y& yy) {
    const State pre{z_c, yy[1], yy[2]};
    if (!res.contacted) {
      res.contacted = true;
      res.t_contact = t_ev;
      res.v_contact = pre.v;
      const double vb = -opts.restitution * pre.v;
      const double u_ev = detail::drive_channels(pre, t_ev, drive, p).u;
      const double ab = bounce_acceleration<double>(pre, vb, u_ev, p);
      res.a_bounce_sat = saturate_bounce_accel_hard(ab, -1);
    } else {
      ++res.bounce_count;
    }
    yy[0] = z_c;
    yy[1] = -opts.restitution * yy[1];
  };

  int guard = 0;
  while (time < t_end) {
    if (++guard > 2000000) throw SimulationFailure("integrate: hybrid mode budget exceeded");
    if (mode == Mode::Free) {
      stepper.initialize(y, time, std::min(opts.max_dt, t_end - time));
      bool switched = false;
      while (stepper.current_time() < t_end) {
        const double t_prev = stepper.current_time();
        stepper.do_step(free_rhs);
        double t_curr = std::min(stepper.current_time(), t_end);
        Y y_curr;
        stepper.calc_state(t_curr, y_curr);
        for (double ts = res.t.back() + opts.max_dt; ts < t_curr; ts += opts.max_dt) {
          Y yo;
          stepper.calc_state(ts, yo);
          if (yo[0] <= z_c || yo[0] >= p.z_max) break;  // stop at wall; event code takes over
          record(ts, yo);
        }
        // event functions: seat crossing from above, stop crossing from below
        const auto hit_low = [&](const Y& q) { return q[0] - z_c; };
        const auto hit_high = [&](const Y& q) { return p.z_max - q[0]; };
        for (const auto& g : {std::function<double(const Y&)>(hit_low),
                              std::function<double(const Y&)>(hit_high)}) {
          if (g(y_curr) >= 0.0) continue;
          double lo = t_prev, hi = t_curr;
          Y y_ev = y_curr;
          while (hi - lo > opts.event_tol_t) {
            const double mid = 0.5 * (lo + hi);
            stepper.calc_state(mid, y_ev);
            (g(y_ev) >= 0.0 ? lo : hi) = mid;
          }
          stepper.calc_state(hi, y_ev);
          t_curr = hi;
          y_curr = y_ev;
          break;
        }
        if (y_curr[0] <= z_c) {
          handle_seat_impact(t_curr, y_curr);
          time = t_curr;
          y = y_curr;
          record(time, y);
          if (std::abs(y[1]) < opts.v_latch ||
              mechanical_accel(z_c, 0.0, y[2], p) <= 0.0) {
            y[1] = 0.0;
            mode = Mode::LatchedLow;
          }
          switched = true;
          break;
        }
        if (y_curr[0] >= p.z_max) {
          time = t_curr;
          y = y_curr;
          y[0] = p.z_max;
          y[1] = -opts.restitution * y[1];
          record(time, y);
          if (std::abs(y[1]) < opts.v_latch ||
              mechanical_accel(p.z_max, 0.0, y[2], p) >= 0.0) {
            y[1] = 0.0;
            mode = Mode::LatchedHigh;
          }
          switched = true;
          break;
        }
        time = t_curr;
        y = y_curr;
        record(time, y);
        if (time >= t_end) break;
      }
      if (!switched && time >= t_end) break;
    } else {
      // flux keeps evolving at fixed position; leave when the net force flips
      const double z_hold = mode == Mode::LatchedLow ? z_c : p.z_max;
      y[0] = z_hold;
      y[1] = 0.0;
      const auto release = [&](const Y& q) {
        const double a = mechanical_accel(z_hold, 0.0, q[2], p);
        return mode == Mode::LatchedLow ? a : -a;
      };
      stepper.initialize(y, time, std::min(opts.max_dt, t_end - time));
      bool released = false;
      while (stepper.current_time() < t_end) {
        const double t_prev = stepper.current_time();
        stepper.do_step(latched_rhs);
        double t_curr = std::min(stepper.current_time(), t_end);
        Y y_curr;
        stepper.calc_state(t_curr, y_curr);
        y_curr[0] = z_hold;
        y_curr[1] = 0.0;
        for (double ts = res.t.back() + opts.max_dt; ts < t_curr; ts += opts.max_dt) {
          Y yo;
          stepper.calc_state(ts, yo);
          yo[0] = z_hold;
          yo[1] = 0.0;
          record(ts, yo);
        }
        if (release(y_curr) > 0.0) {
          double lo = t_prev, hi = t_curr;
          Y y_ev = y_curr;
          while (hi - lo > opts.event_tol_t) {
            const double mid = 0.5 * (lo + hi);
            stepper.calc_state(mid, y_ev);
            y_ev[0] = z_hold;
            y_ev[1] = 0.0;
            (release(y_ev) <= 0.0 ? lo : hi) = mid;
          }
          stepper.calc_state(hi, y_ev);
          y_ev[0] = z_hold;
          y_ev[1] = 0.0;
          time = hi;
          y = y_ev;
          record(time, y);
          mode = Mode::Free;
          released = true;
          break;
        }
        time = t_curr;
        y = y_curr;
        record(time, y);
        if (time >= t_end) break;
      }
      if (!released && time >= t_end) break;
    }
  }

  // energy accounting over the recorded samples
  for (std::size_t k = 0; k + 1 < res.t.size(); ++k) {
    const double dt = res.t[k + 1] - res.t[k];
    res.energy_mJ += 0.5 * (res.u[k] * res.u[k] + res.u[k + 1] * res.u[k + 1]) / p.R * dt;
    res.energy_ui_mJ += 0.5 * (res.u[k] * res.i[k] + res.u[k + 1] * res.i[k + 1]) * dt;
  }
  res.energy_mJ *= 1e3;
  res.energy_ui_mJ *= 1e3;
  return res;
}

}  // namespace softland
