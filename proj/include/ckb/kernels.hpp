#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "ckb/core_types.hpp"
#include "ckb/detail/phi.hpp"

namespace ckb {

/// Rescaled time (1 - e^{-gamma t}) / gamma; equals t when gamma = 0.
inline double tau_of_t(double gamma, double t) { return t * detail::phi1(gamma * t); }

/// Stochastic integrals of one force realization, sampled at the time nodes.
///
///   impulse  I(t)  = int_0^t e^{gamma s} F(s) ds          (canonical momentum shift)
///   drift    f1(t) = (1/m)  int_0^t I(s)   e^{-gamma s} ds (center displacement)
///   phase    f2(t) = (1/2m) int_0^t I(s)^2 e^{-gamma s} ds (global phase)
///
/// These are the tau-space integrals rewritten with dtau = e^{-gamma t} dt,
/// which keeps the integrands regular as tau approaches 1/gamma.
struct PathIntegrals {
  TimeGrid tgrid;
  std::vector<double> tau;
  std::vector<double> impulse;
  std::vector<double> drift;
  std::vector<double> phase;
};

/// Cumulative trapezoid on the path's grid. The piecewise-constant force
/// contributes its interval value F_j at both ends of [t_j, t_j+1].
inline PathIntegrals compute_path_integrals(const NoisePath& path, const PhysicalParams& params) {
  const TimeGrid& g = path.grid();
  const std::size_t n = g.n_nodes();
  const double dt = g.dt();
  const double gamma = params.gamma();
  const double m = params.m();

  PathIntegrals out{g, std::vector<double>(n), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                    std::vector<double>(n, 0.0)};
  for (std::size_t j = 0; j < n; ++j) out.tau[j] = tau_of_t(gamma, g.node(j));

  double grow_prev = 1.0;   // e^{gamma t_j}
  double decay_prev = 1.0;  // e^{-gamma t_j}
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double t1 = g.node(j + 1);
    const double grow = std::exp(gamma * t1);
    const double decay = std::exp(-gamma * t1);
    const double F = path[j];
    const double I0 = out.impulse[j];
    const double I1 = I0 + 0.5 * dt * F * (grow_prev + grow);
    out.impulse[j + 1] = I1;
    out.drift[j + 1] = out.drift[j] + 0.5 * dt * (I0 * decay_prev + I1 * decay) / m;
    out.phase[j + 1] = out.phase[j] + 0.25 * dt * (I0 * I0 * decay_prev + I1 * I1 * decay) / m;
    grow_prev = grow;
    decay_prev = decay;
  }
  return out;
}

/// Path integrals over [t_from, t_to] with the impulse re-based to zero at
/// t_from, plus the rescaled-time increment. This is what the propagator
/// between two nonzero times needs.
struct KernelIncrement {
  double dtau = 0.0;
  double impulse = 0.0;
  double drift = 0.0;
  double phase = 0.0;
};

inline KernelIncrement rebase(const PathIntegrals& in, double m, double gamma, std::size_t from, std::size_t to) {
  if (to < from || to >= in.tau.size()) throw std::out_of_range("rebase: invalid node range");
  const TimeGrid& g = in.tgrid;
  const double dt = g.dt();
  const double I_ref = in.impulse[from];
  KernelIncrement inc;
  inc.dtau = in.tau[to] - in.tau[from];
  double Ip = 0.0;
  double dp = std::exp(-gamma * g.node(from));
  for (std::size_t j = from; j < to; ++j) {
    const double In = in.impulse[j + 1] - I_ref;
    const double dn = std::exp(-gamma * g.node(j + 1));
    inc.drift += 0.5 * dt * (Ip * dp + In * dn) / m;
    inc.phase += 0.25 * dt * (Ip * Ip * dp + In * In * dn) / m;
    Ip = In;
    dp = dn;
  }
  inc.impulse = Ip;
  return inc;
}

inline KernelIncrement increment_from_origin(const PathIntegrals& in, std::size_t j) {
  return {in.tau[j], in.impulse[j], in.drift[j], in.phase[j]};
}

/// Plane-wave solution labeled by its initial canonical wavenumber k:
/// (2 pi)^{-1/2} exp[i (k + I) x - i (k^2 tau / 2m + k f1 + f2)].
inline Complex plane_wave(double k, double x, const PathIntegrals& in, const PhysicalParams& params,
                          std::size_t j) {
  const double p = k + in.impulse[j];
  const double alpha = k * k * in.tau[j] / (2.0 * params.m()) + k * in.drift[j] + in.phase[j];
  return std::polar(1.0 / std::sqrt(2.0 * M_PI), p * x - alpha);
}

class PropagatorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Closed-form kernel for one increment:
/// sqrt(m / (2 pi i dtau)) exp{ i m (x - x' - f1)^2 / (2 dtau) + i I x - i f2 }.
/// Branch: 1/sqrt(i) = e^{-i pi/4}.
inline Complex propagator(double x, double x_prime, const KernelIncrement& inc, double m) {
  if (!(inc.dtau > 0.0)) throw PropagatorError("propagator: coincident times (dtau = 0) are singular");
  const double amp = std::sqrt(m / (2.0 * M_PI * inc.dtau));
  const double d = x - x_prime - inc.drift;
  const double arg = m * d * d / (2.0 * inc.dtau) + inc.impulse * x - inc.phase - M_PI / 4.0;
  return std::polar(amp, arg);
}

/// G(x, t | x', t') with t, t' given as node indices of the integrals' grid.
inline Complex propagator(double x, std::size_t t, double x_prime, std::size_t t_prime, const PathIntegrals& in,
                          const PhysicalParams& params) {
  if (t <= t_prime) throw PropagatorError("propagator: requires t > t'");
  const KernelIncrement inc =
      t_prime == 0 ? increment_from_origin(in, t) : rebase(in, params.m(), params.gamma(), t_prime, t);
  return propagator(x, x_prime, inc, params.m());
}

/// sqrt(sigma0^2 + tau^2 / (4 m^2 sigma0^2)).
inline double gaussian_width(double sigma0, double m, double tau) {
  const double s = tau / (2.0 * m * sigma0);
  return std::sqrt(sigma0 * sigma0 + s * s);
}

/// Evolved Gaussian packet at node j, sampled on xgrid. The center moves to
/// x0 + f1 and the width follows gaussian_width; the packet is the x0 = 0
/// solution translated by x0 (times the phase e^{i x0 I}).
inline WaveField evolve_gaussian(const GaussianPacket& packet, const PathIntegrals& in, const PhysicalParams& params,
                                 std::size_t j, const SpatialGrid& xgrid) {
  const double m = params.m();
  const double s0 = packet.sigma0();
  const double tau = in.tau[j];
  const Complex pref = std::pow(2.0 * M_PI, -0.25) / std::sqrt(Complex(s0, tau / (2.0 * m * s0)));
  const Complex denom(4.0 * m * s0 * s0, 2.0 * tau);
  const double center = packet.x0() + in.drift[j];

  WaveField out{xgrid, std::vector<Complex>(xgrid.size()), in.tgrid.node(j)};
  for (std::size_t k = 0; k < xgrid.size(); ++k) {
    const double x = xgrid.x(k);
    const double d = x - center;
    const Complex expo = -m * d * d / denom + Complex(0.0, in.impulse[j] * x - in.phase[j]);
    out.values[k] = pref * std::exp(expo);
  }
  return out;
}

/// Spread of the packet center over white-noise realizations,
/// sqrt((D / eta^2) [t - (1 - e^{-gamma t}) / gamma]). Undefined for eta = 0.
inline double classical_uncertainty_analytic(const PhysicalParams& params, double t) {
  if (!(params.eta() > 0.0))
    throw std::domain_error("classical_uncertainty_analytic: eta must be positive");
  const double g = params.gamma();
  // t - tau(t) = gamma t^2 phi2(gamma t)
  const double bracket = g * t * t * detail::phi2(g * t);
  return std::sqrt(params.D() / (params.eta() * params.eta()) * bracket);
}

/// Exact variance of the center for a start from rest (v(0) = 0) under white
/// noise: D int_0^t g(u)^2 du with g(u) = (1 - e^{-gamma u}) / eta. Reduces to
/// D t^3 / (3 m^2) at gamma = 0.
inline double center_variance_from_rest(const PhysicalParams& params, double t) {
  const double m = params.m();
  return params.D() * t * t * t * detail::phi_sq(params.gamma() * t) / (m * m);
}

}  // namespace ckb
