#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "ckb/core_types.hpp"
#include "ckb/kernels.hpp"

namespace ckb {

/// Expected excursion of a packet from its start: late width plus five
/// standard deviations of the center. Uses the long-time diffusion form
/// sqrt(D t / eta^2) when damped, and sqrt(D t^3 / 3 m^2) when eta = 0.
inline double expected_excursion(const PhysicalParams& params, const GaussianPacket& packet, double t_end) {
  const double width = gaussian_width(packet.sigma0(), params.m(), tau_of_t(params.gamma(), t_end));
  double spread = 0.0;
  if (params.eta() > 0.0)
    spread = std::sqrt(params.D() * t_end) / params.eta();
  else
    spread = std::sqrt(params.D() * t_end * t_end * t_end / 3.0) / params.m();
  return width + 5.0 * spread;
}

/// Checks the combination of parameters and grids. Invalid single values are
/// already rejected by the type constructors; this adds cross-checks and the
/// domain-excursion warning.
inline ValidatedConfig validate(const PhysicalParams& params, const GaussianPacket& packet, const TimeGrid& tgrid,
                                const SpatialGrid& xgrid) {
  ValidatedConfig cfg{params, tgrid, xgrid, {}};
  const double quarter = 0.25 * xgrid.length();
  const double excursion = expected_excursion(params, packet, tgrid.t_end());
  if (excursion > quarter) {
    std::ostringstream os;
    os << "expected packet excursion " << excursion << " exceeds a quarter of the spatial domain (" << quarter
       << "); periodic wrap-around may corrupt results";
    cfg.warnings.push_back(os.str());
  }
  const double lo = packet.x0() - 8.0 * packet.sigma0();
  const double hi = packet.x0() + 8.0 * packet.sigma0();
  if (lo < xgrid.x_min() || hi > xgrid.x_max()) {
    cfg.warnings.push_back("initial packet does not fit 8 sigma0 on each side of x0 inside the domain");
  }
  return cfg;
}

}  // namespace ckb
