#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ckb/core_types.hpp"
#include "ckb/detail/phi.hpp"

namespace ckb {

struct Trajectory {
  TimeGrid tgrid;
  std::vector<double> x;
  std::vector<double> v;
};

/// Integrates m x'' + eta x' = F(t) with the exact flow of each
/// piecewise-constant interval, so node values carry no truncation error.
inline Trajectory integrate(const NoisePath& path, const PhysicalParams& params, double x0 = 0.0, double v0 = 0.0) {
  const TimeGrid& g = path.grid();
  const double dt = g.dt();
  const double a = params.gamma() * dt;
  const double decay = std::exp(-a);
  const double p1 = detail::phi1(a);
  const double p2 = detail::phi2(a);
  const double m = params.m();

  Trajectory tr{g, std::vector<double>(g.n_nodes()), std::vector<double>(g.n_nodes())};
  tr.x[0] = x0;
  tr.v[0] = v0;
  for (std::size_t j = 0; j < g.n_steps(); ++j) {
    const double F = path[j];
    tr.x[j + 1] = tr.x[j] + tr.v[j] * dt * p1 + F * dt * dt * p2 / m;
    tr.v[j + 1] = decay * tr.v[j] + F * dt * p1 / m;
  }
  return tr;
}

/// Unbiased sample variance of x(t_j) across realizations, at every node.
inline std::vector<double> ensemble_center_variance(std::span<const NoisePath> paths, const PhysicalParams& params,
                                                    double x0 = 0.0, double v0 = 0.0) {
  if (paths.size() < 2) throw std::invalid_argument("ensemble_center_variance: need at least 2 paths");
  const TimeGrid& g = paths.front().grid();
  std::vector<double> mean(g.n_nodes(), 0.0);
  std::vector<double> m2(g.n_nodes(), 0.0);
  double count = 0.0;
  for (const auto& p : paths) {
    if (!(p.grid() == g)) throw std::invalid_argument("ensemble_center_variance: paths on different grids");
    const Trajectory tr = integrate(p, params, x0, v0);
    count += 1.0;
    for (std::size_t j = 0; j < g.n_nodes(); ++j) {
      const double d = tr.x[j] - mean[j];
      mean[j] += d / count;
      m2[j] += d * (tr.x[j] - mean[j]);
    }
  }
  for (auto& v : m2) v /= (count - 1.0);
  return m2;
}

}  // namespace ckb
