#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "softland/expectations.hpp"
#include "softland/ocp.hpp"
#include "softland/solve.hpp"

namespace softland {

struct SweepPoint {
  double sigma_z = 0.0;
  bool pos_ok = false, eos_ok = false;
  double evc_pos = 0.0, eac_pos = 0.0;
  double evc_eos = 0.0, eac_eos = 0.0;
  std::string pos_error, eos_error;
};

// Re-solves the POS problem for each sigma_z and evaluates both designs'
// expectations under that sigma. The EOS design does not depend on sigma_z,
// so it is solved once and only re-evaluated. Failures are recorded per
// point; the sweep continues.
inline std::vector<SweepPoint> sigma_sweep(const OcpSpec& spec_template,
                                           const std::vector<double>& sigma_list) {
  for (std::size_t k = 0; k < sigma_list.size(); ++k) {
    if (!(sigma_list[k] > 0.0)) throw std::invalid_argument("sigma_sweep: sigmas must be > 0");
    if (k > 0 && !(sigma_list[k] > sigma_list[k - 1]))
      throw std::invalid_argument("sigma_sweep: sigmas must be sorted ascending");
  }

  OcpSpec eos = spec_template;
  eos.mode = Mode::EOS;
  Trajectory eos_traj;
  bool have_eos = false;
  std::string eos_error;
  try {
    eos_traj = continuation_solve(eos);
    have_eos = true;
  } catch (const std::exception& e) {
    eos_error = e.what();
  }

  std::vector<SweepPoint> out(sigma_list.size());
  for (std::size_t k = 0; k < sigma_list.size(); ++k) {
    SweepPoint& pt = out[k];
    pt.sigma_z = sigma_list[k];

    OcpSpec pos = spec_template;
    pos.mode = Mode::POS;
    pos.contact.sigma_z = pt.sigma_z;
    try {
      const Trajectory traj = continuation_solve(pos);
      pt.evc_pos = expected_contact_velocity(traj, pos.contact);
      const auto ctrl = [&traj](double t) { return traj.control_at(t); };
      pt.eac_pos =
          expected_contact_acceleration(traj, ctrl, pos.contact, pos.params, pos.bounce);
      pt.pos_ok = true;
    } catch (const std::exception& e) {
      pt.pos_error = e.what();
    }

    if (have_eos) {
      ContactModel cm = spec_template.contact;
      cm.sigma_z = pt.sigma_z;
      try {
        pt.evc_eos = expected_contact_velocity(eos_traj, cm);
        const auto ctrl = [&eos_traj](double t) { return eos_traj.control_at(t); };
        pt.eac_eos = expected_contact_acceleration(eos_traj, ctrl, cm, eos.params, eos.bounce);
        pt.eos_ok = true;
      } catch (const std::exception& e) {
        pt.eos_error = e.what();
      }
    } else {
      pt.eos_error = eos_error;
    }
  }
  return out;
}

}  // namespace softland
