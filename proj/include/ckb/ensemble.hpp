#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ckb/core_types.hpp"
#include "ckb/kernels.hpp"
#include "ckb/noise.hpp"
#include "ckb/tdse_solver.hpp"

namespace ckb {

enum class Engine { analytic, solver };

inline const char* to_string(Engine e) { return e == Engine::analytic ? "analytic" : "solver"; }

class EnsembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnsembleOptions {
  /// 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
  /// Required for the solver engine.
  std::optional<SpatialGrid> xgrid;
  /// Allowed |width_i(t) - width_0(t)| across paths in solver mode. The
  /// analytic engine demands bit equality.
  double width_tol = 1e-8;
  double norm_tol = 1e-8;
};

/// Packet center and width at every node for one realization.
struct PathResult {
  std::vector<double> center;
  std::vector<double> width;
};

inline PathResult run_path(Engine engine, const NoisePath& path, const PhysicalParams& params,
                           const GaussianPacket& packet, const EnsembleOptions& opt) {
  const std::size_t n = path.grid().n_nodes();
  PathResult r{std::vector<double>(n), std::vector<double>(n)};
  if (engine == Engine::analytic) {
    const PathIntegrals in = compute_path_integrals(path, params);
    for (std::size_t j = 0; j < n; ++j) {
      r.center[j] = packet.x0() + in.drift[j];
      r.width[j] = gaussian_width(packet.sigma0(), params.m(), in.tau[j]);
    }
    return r;
  }
  if (!opt.xgrid) throw ConfigError("solver engine requires a spatial grid");
  SolverConfig cfg{*opt.xgrid, path.grid(), SplittingScheme::strang, opt.norm_tol, {}};
  const SolverRun run_out = run(packet, path, params, cfg);
  for (std::size_t j = 0; j < n; ++j) {
    r.center[j] = run_out.obs[j].mean_x;
    r.width[j] = std::sqrt(run_out.obs[j].var_x);
  }
  return r;
}

namespace detail {

struct Moments {
  double count = 0.0;
  std::vector<double> mean;
  std::vector<double> m2;
};

// Pairwise (Chan et al.) merge over path indices [lo, hi), split at the
// midpoint. The tree depends only on the index range, so the result does not
// depend on how paths were scheduled.
inline Moments reduce_moments(const std::vector<PathResult>& rs, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) {
    return {1.0, rs[lo].center, std::vector<double>(rs[lo].center.size(), 0.0)};
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  Moments a = reduce_moments(rs, lo, mid);
  const Moments b = reduce_moments(rs, mid, hi);
  const double n = a.count + b.count;
  for (std::size_t j = 0; j < a.mean.size(); ++j) {
    const double delta = b.mean[j] - a.mean[j];
    a.mean[j] += delta * b.count / n;
    a.m2[j] += b.m2[j] + delta * delta * a.count * b.count / n;
  }
  a.count = n;
  return a;
}

template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto body = [&](unsigned w) {
    try {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    } catch (...) {
      errors[w] = std::current_exception();
      next = n;
    }
  };
  if (workers <= 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline std::vector<std::uint64_t> ensemble_seeds(std::uint64_t base_seed, std::size_t n_paths) {
  std::vector<std::uint64_t> seeds(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) seeds[i] = path_seed(base_seed, i);
  return seeds;
}

/// Runs one white-noise realization per seed, concurrently. Output order
/// follows the seed order.
inline std::vector<PathResult> run_paths(const PhysicalParams& params, const GaussianPacket& packet,
                                         const TimeGrid& tgrid, const std::vector<std::uint64_t>& seeds,
                                         Engine engine, const EnsembleOptions& opt = {}) {
  if (engine == Engine::solver && !opt.xgrid) throw ConfigError("solver engine requires a spatial grid");
  std::vector<PathResult> results(seeds.size());
  detail::parallel_for(seeds.size(), opt.workers, [&](std::size_t i) {
    results[i] = run_path(engine, make_white_noise(params, tgrid, seeds[i]), params, packet, opt);
  });
  return results;
}

/// Aggregates per-path results into center statistics and the uncertainty
/// decomposition at every node. Throws EnsembleError when widths differ across
/// paths (bitwise for the analytic engine, beyond width_tol for the solver).
inline EnsembleReport aggregate(const PhysicalParams& params, const TimeGrid& tgrid,
                                const std::vector<PathResult>& results, Engine engine, const EnsembleOptions& opt,
                                std::uint64_t base_seed, std::vector<std::uint64_t> seeds) {
  const std::size_t n_paths = results.size();
  if (n_paths < 2) throw ConfigError("ensemble needs at least 2 paths");
  const std::size_t n = tgrid.n_nodes();
  const std::vector<double>& ref_width = results.front().width;
  for (std::size_t i = 1; i < n_paths; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = results[i].width[j];
      const bool ok = engine == Engine::analytic ? w == ref_width[j] : std::abs(w - ref_width[j]) <= opt.width_tol;
      if (!ok)
        throw EnsembleError("path-dependent packet width at path " + std::to_string(i) + ", node " +
                            std::to_string(j));
    }
  }

  const detail::Moments mom = detail::reduce_moments(results, 0, n_paths);

  EnsembleReport rep;
  rep.times = tgrid.nodes();
  rep.tau.resize(n);
  rep.n_paths = n_paths;
  rep.center_mean = mom.mean;
  rep.center_var.resize(n);
  rep.width_qu = ref_width;
  rep.dx_cl_analytic.resize(n);
  rep.dx_total.resize(n);
  rep.base_seed = base_seed;
  rep.seeds = std::move(seeds);
  for (std::size_t j = 0; j < n; ++j) {
    rep.tau[j] = tau_of_t(params.gamma(), rep.times[j]);
    rep.center_var[j] = std::max(0.0, mom.m2[j] / (mom.count - 1.0));
    rep.dx_cl_analytic[j] = params.eta() > 0.0 ? classical_uncertainty_analytic(params, rep.times[j])
                                               : std::numeric_limits<double>::quiet_NaN();
    rep.dx_total[j] = std::sqrt(rep.width_qu[j] * rep.width_qu[j] + rep.center_var[j]);
  }
  return rep;
}

/// Runs n_paths white-noise realizations (path i seeded by
/// path_seed(base_seed, i)) and aggregates them.
inline EnsembleReport run_ensemble(const PhysicalParams& params, const GaussianPacket& packet, const TimeGrid& tgrid,
                                   std::size_t n_paths, std::uint64_t base_seed, Engine engine,
                                   const EnsembleOptions& opt = {}) {
  if (n_paths < 2) throw ConfigError("ensemble needs at least 2 paths");
  auto seeds = ensemble_seeds(base_seed, n_paths);
  const auto results = run_paths(params, packet, tgrid, seeds, engine, opt);
  return aggregate(params, tgrid, results, engine, opt, base_seed, std::move(seeds));
}

struct Decomposition {
  double dx_qu = 0.0;
  double dx_cl_sample = 0.0;
  double dx_cl_analytic = 0.0;
  double dx_total = 0.0;
};

inline Decomposition decompose_uncertainty(const EnsembleReport& rep, std::size_t j) {
  if (j >= rep.times.size()) throw std::out_of_range("decompose_uncertainty: node index out of range");
  return {rep.width_qu[j], std::sqrt(rep.center_var[j]), rep.dx_cl_analytic[j], rep.dx_total[j]};
}

/// Default probe times {0.5, 1, 2, 5, 10} / gamma (absolute times when gamma = 0).
inline std::vector<double> default_probe_times(const PhysicalParams& params) {
  const double scale = params.gamma() > 0.0 ? 1.0 / params.gamma() : 1.0;
  return {0.5 * scale, 1.0 * scale, 2.0 * scale, 5.0 * scale, 10.0 * scale};
}

}  // namespace ckb
