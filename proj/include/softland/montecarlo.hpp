#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "softland/contact.hpp"
#include "softland/errors.hpp"
#include "softland/sim.hpp"

namespace softland {

// Counter-based sampling: each (seed, index) pair maps to an independent
// draw, so results are bit-identical regardless of thread count or order.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  const std::uint64_t h = splitmix64(splitmix64(seed ^ (stream * 0xd6e8feb86659fd93ULL)) + index);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(std::uint64_t seed, std::uint64_t index) {
  const double u1 = uniform01(seed, index, 1);
  const double u2 = uniform01(seed, index, 2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace rng

struct McOptions {
  std::uint64_t seed = 0;
  int n_samples = 1000;
  SimOptions sim;
  int threads = 0;  // 0 = hardware concurrency
};

struct McReport {
  int n_samples = 0;
  std::uint64_t seed = 0;
  int n_contacted = 0;
  double p_contact = 0.0;          // empirical P(contact <= t_f)
  double mean_contact_velocity = 0.0;
  double std_contact_velocity = 0.0;
  double mean_contact_time = 0.0;
  double std_contact_time = 0.0;
  double mean_bounce_accel = 0.0;  // saturated, conditional on contact
  double std_bounce_accel = 0.0;
  double mean_energy_mJ = 0.0;     // int u^2/R dt
  double mean_energy_ui_mJ = 0.0;  // int u*i dt
};

namespace detail {

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

struct McSample {
  bool contacted = false;
  double v = 0.0, t = 0.0, a = 0.0, e = 0.0, eui = 0.0;
};

}  // namespace detail

// Samples the contact position Z_c from the contact model, simulates each
// draw under the same drive, and aggregates conditional contact statistics.
// The per-sample results are reduced in index order, so the report is
// bit-identical for any thread count.
inline McReport monte_carlo(const ActuatorParams& p, const DriveSignal& drive,
                            const ContactModel& cm, double t_end, const McOptions& opts,
                            const std::optional<State>& x0 = {}) {
  if (opts.n_samples < 1) throw std::invalid_argument("monte_carlo: n_samples must be >= 1");
  cm.validate();

  const int nthreads =
      opts.threads > 0 ? opts.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<detail::McSample> samples(static_cast<std::size_t>(opts.n_samples));

  const auto worker = [&](int tid) {
    for (int k = tid; k < opts.n_samples; k += nthreads) {
      const double zc =
          cm.mu_z + cm.sigma_z * rng::standard_normal(opts.seed, static_cast<std::uint64_t>(k));
      const SimResult r = integrate(p, drive, std::min(zc, p.z_max - 1e-12), t_end, opts.sim, x0);
      detail::McSample& out = samples[static_cast<std::size_t>(k)];
      out.contacted = r.contacted;
      out.v = r.v_contact;
      out.t = r.t_contact;
      out.a = r.a_bounce_sat;
      out.e = r.energy_mJ;
      out.eui = r.energy_ui_mJ;
    }
  };

  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int tid = 0; tid < nthreads; ++tid) pool.emplace_back(worker, tid);
    for (auto& th : pool) th.join();
  }

  long n_hit = 0;
  detail::KahanSum v, v2, t, t2, a, a2, e, eui;
  for (const auto& s : samples) {
    e.add(s.e);
    eui.add(s.eui);
    if (!s.contacted) continue;
    ++n_hit;
    v.add(s.v);
    v2.add(s.v * s.v);
    t.add(s.t);
    t2.add(s.t * s.t);
    a.add(s.a);
    a2.add(s.a * s.a);
  }
  if (n_hit == 0) throw AllSamplesMissedContact("monte_carlo: no sample reached contact");

  const auto mean_std = [n_hit](const detail::KahanSum& s1, const detail::KahanSum& s2,
                                double& mean, double& sd) {
    mean = s1.value() / static_cast<double>(n_hit);
    const double var = std::max(0.0, s2.value() / static_cast<double>(n_hit) - mean * mean);
    sd = std::sqrt(var);
  };

  McReport rep;
  rep.n_samples = opts.n_samples;
  rep.seed = opts.seed;
  rep.n_contacted = static_cast<int>(n_hit);
  rep.p_contact = static_cast<double>(n_hit) / opts.n_samples;
  mean_std(v, v2, rep.mean_contact_velocity, rep.std_contact_velocity);
  mean_std(t, t2, rep.mean_contact_time, rep.std_contact_time);
  mean_std(a, a2, rep.mean_bounce_accel, rep.std_bounce_accel);
  rep.mean_energy_mJ = e.value() / opts.n_samples;
  rep.mean_energy_ui_mJ = eui.value() / opts.n_samples;
  return rep;
}

}  // namespace softland
