#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ckb/core_types.hpp"

namespace ckb {

/// splitmix64 finalizer; full 64-bit avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of realization `index` in an ensemble started from `base_seed`.
/// Depends only on (base_seed, index), so paths can be generated in any order.
constexpr std::uint64_t path_seed(std::uint64_t base_seed, std::uint64_t index) {
  return mix64(mix64(base_seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// White noise phi(t) = D delta(t), discretized as iid N(0, D/dt) per interval
/// so that the impulse over one step has variance D*dt.
inline NoisePath make_white_noise(const PhysicalParams& params, const TimeGrid& tgrid, std::uint64_t seed) {
  std::vector<double> samples(tgrid.n_nodes(), 0.0);
  if (params.D() > 0.0) {
    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(params.D() / tgrid.dt()));
    for (auto& s : samples) s = normal(engine);
  }
  return NoisePath(tgrid, std::move(samples), {NoiseKind::white, params.D(), seed});
}

inline NoisePath make_constant_force(double F0, const TimeGrid& tgrid) {
  const NoiseKind kind = F0 == 0.0 ? NoiseKind::zero : NoiseKind::constant;
  return NoisePath(tgrid, std::vector<double>(tgrid.n_nodes(), F0), {kind, 0.0, 0});
}

inline NoisePath make_zero_force(const TimeGrid& tgrid) { return make_constant_force(0.0, tgrid); }

/// Wraps externally generated samples (e.g. colored noise). Throws ConfigError
/// on a length mismatch.
inline NoisePath make_custom(std::vector<double> samples, const TimeGrid& tgrid) {
  return NoisePath(tgrid, std::move(samples), {NoiseKind::custom, 0.0, 0});
}

/// Same piecewise-constant function of t on a grid with `factor` times as many
/// steps. Used for dt-refinement studies of a fixed realization.
inline NoisePath refine(const NoisePath& path, std::size_t factor) {
  if (factor < 1) throw ConfigError("refinement factor must be >= 1");
  const TimeGrid& g = path.grid();
  TimeGrid fine(g.t_end(), g.n_steps() * factor);
  std::vector<double> samples(fine.n_nodes());
  for (std::size_t j = 0; j < fine.n_steps(); ++j) samples[j] = path[j / factor];
  samples.back() = path[g.n_steps()];
  return NoisePath(fine, std::move(samples), path.meta());
}

}  // namespace ckb
