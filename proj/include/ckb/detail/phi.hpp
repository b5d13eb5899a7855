#pragma once

#include <cmath>

// Exponential-integrator phi functions, evaluated without cancellation near
// a = 0. All are smooth at a = 0 so gamma = 0 needs no special case.
namespace ckb::detail {

/// (1 - e^{-a}) / a
inline double phi1(double a) {
  if (std::abs(a) < 1e-8) return 1.0 - a / 2.0;
  return -std::expm1(-a) / a;
}

/// (a - 1 + e^{-a}) / a^2
inline double phi2(double a) {
  if (std::abs(a) < 1e-2) return 0.5 + a * (-1.0 / 6.0 + a * (1.0 / 24.0 + a * (-1.0 / 120.0 + a / 720.0)));
  return (a + std::expm1(-a)) / (a * a);
}

/// (a - 2(1 - e^{-a}) + (1 - e^{-2a})/2) / a^3, i.e. int_0^1 (1 - e^{-a u})^2 du / a^2
inline double phi_sq(double a) {
  if (std::abs(a) < 1e-2)
    return 1.0 / 3.0 + a * (-0.25 + a * (7.0 / 60.0 + a * (-1.0 / 24.0 + a * 31.0 / 2520.0)));
  return (a + 2.0 * std::expm1(-a) - 0.5 * std::expm1(-2.0 * a)) / (a * a * a);
}

}  // namespace ckb::detail
