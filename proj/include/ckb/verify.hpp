#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ckb/ensemble.hpp"
#include "ckb/kernels.hpp"
#include "ckb/langevin.hpp"
#include "ckb/noise.hpp"
#include "ckb/tdse_solver.hpp"

/// Desk-scale verification suite. Each check returns its measured values
/// next to the thresholds it was judged against.
namespace ckb::verify {

struct Metric {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

struct CheckResult {
  int id = 0;
  std::string name;
  std::vector<Metric> metrics;
  /// Diagnostics print but do not affect pass/fail.
  std::vector<Metric> diagnostics;
  std::string error;

  bool pass() const {
    if (!error.empty()) return false;
    return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
  }
};

struct Options {
  unsigned workers = 0;
  std::uint64_t seed = 20240601;
};

namespace detail {

inline Metric at_most(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value <= threshold};
}

inline Metric at_least(std::string name, double value, double threshold) {
  return {std::move(name), value, threshold, value >= threshold};
}

inline SolverRun solve(const GaussianPacket& pk, const NoisePath& path, const PhysicalParams& p, const SpatialGrid& xg,
                       std::vector<std::size_t> snapshots = {}) {
  return run(pk, path, p, SolverConfig{xg, path.grid(), SplittingScheme::strang, 1e-8, std::move(snapshots)});
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// Max |psi_a - e^{i theta} psi_b| with theta chosen so the two agree in
/// phase at the node nearest `center`.
inline double phase_aligned_error(const WaveField& a, const WaveField& b, double center) {
  const std::size_t k0 = a.grid.nearest(center);
  const Complex ra = a.values[k0];
  const Complex rb = b.values[k0];
  const Complex rot = (ra / std::abs(ra)) / (rb / std::abs(rb));
  double err = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) err = std::max(err, std::abs(a.values[k] - rot * b.values[k]));
  return err;
}

// Trapezoid quadrature of f(x') psi(x') over a uniform grid.
template <class Kernel>
Complex apply_kernel(const std::vector<double>& xs, const std::vector<Complex>& psi, double h, Kernel&& g) {
  Complex s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = (i == 0 || i + 1 == xs.size()) ? 0.5 : 1.0;
    s += w * g(xs[i]) * psi[i];
  }
  return s * h;
}

}  // namespace detail

/// Width saturation for m = sigma0 = gamma = 1 under zero force.
inline CheckResult width_freeze(const Options&) {
  CheckResult r{1, "width freeze (zero force, gamma=1)", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 0.0);
  const GaussianPacket pk(1.0);
  const TimeGrid tg(20.0, 8192);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const auto path = make_zero_force(tg);
  const SolverRun s = detail::solve(pk, path, p, xg);
  const double tau20 = -std::expm1(-20.0);
  const double expect = std::sqrt(1.0 + tau20 * tau20 / 4.0);
  r.metrics.push_back(detail::at_most("solver width(20) relative error", detail::rel(std::sqrt(s.obs.back().var_x), expect), 1e-6));
  const double w20 = gaussian_width(1.0, 1.0, tau_of_t(1.0, 20.0));
  const double w40 = gaussian_width(1.0, 1.0, tau_of_t(1.0, 40.0));
  r.metrics.push_back(detail::at_most("|width(40) - width(20)| analytic", std::abs(w40 - w20), 1e-8));
  return r;
}

inline CheckResult undamped_limit(const Options&) {
  CheckResult r{2, "undamped limit (gamma=0, zero force)", {}, {}, {}};
  const PhysicalParams p(1.0, 0.0, 0.0);
  const GaussianPacket pk(1.0);
  const TimeGrid tg(5.0, 4096);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const SolverRun s = detail::solve(pk, make_zero_force(tg), p, xg);
  const double expect = std::sqrt(1.0 + 25.0 / 4.0);
  r.metrics.push_back(detail::at_most("solver width(5) relative error", detail::rel(std::sqrt(s.obs.back().var_x), expect), 1e-6));
  return r;
}

inline CheckResult constant_force_ehrenfest(const Options&) {
  CheckResult r{3, "constant-force Ehrenfest (F0=1, gamma=1)", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 0.0);
  const GaussianPacket pk(1.0);
  const TimeGrid tg(10.0, 8192);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const auto path = make_constant_force(1.0, tg);
  const SolverRun s = detail::solve(pk, path, p, xg);
  const PathIntegrals in = compute_path_integrals(path, p);
  const double exact = 10.0 + std::expm1(-10.0);
  const double solver = s.obs.back().mean_x;
  const double f1 = in.drift.back();
  r.metrics.push_back(detail::at_most("|<x>_solver - exact|", std::abs(solver - exact), 1e-5));
  r.metrics.push_back(detail::at_most("|f1 - exact|", std::abs(f1 - exact), 1e-5));
  r.metrics.push_back(detail::at_most("|<x>_solver - f1|", std::abs(solver - f1), 1e-5));
  return r;
}

struct EnsembleFixture {
  PhysicalParams params{1.0, 1.0, 1.0};
  GaussianPacket packet{1.0};
  TimeGrid tgrid{10.0, 1000};
  std::size_t n_paths = 2000;
};

inline CheckResult classical_diffusion(const Options& opt) {
  CheckResult r{4, "classical diffusion law (N=2000, gamma=D=eta=1)", {}, {}, {}};
  const EnsembleFixture f;
  EnsembleOptions eo;
  eo.workers = opt.workers;
  const EnsembleReport rep = run_ensemble(f.params, f.packet, f.tgrid, f.n_paths, opt.seed, Engine::analytic, eo);
  const double tol = 3.0 * std::sqrt(2.0 / static_cast<double>(f.n_paths - 1));
  for (double t : default_probe_times(f.params)) {
    const std::size_t j = f.tgrid.nearest(t);
    const double target = std::pow(rep.dx_cl_analytic[j], 2);
    std::ostringstream name;
    name << "t=" << t << " |var/(dx_cl)^2 - 1|";
    r.metrics.push_back(detail::at_most(name.str(), std::abs(rep.center_var[j] / target - 1.0), tol));
    std::ostringstream dname;
    dname << "t=" << t << " |var/var_from_rest - 1| (exact law for v(0)=0)";
    r.diagnostics.push_back(
        detail::at_most(dname.str(), std::abs(rep.center_var[j] / center_variance_from_rest(f.params, t) - 1.0), tol));
  }
  return r;
}

inline CheckResult decomposition(const Options& opt) {
  CheckResult r{5, "uncertainty decomposition", {}, {}, {}};
  const EnsembleFixture f;
  EnsembleOptions eo;
  eo.workers = opt.workers;
  const EnsembleReport rep = run_ensemble(f.params, f.packet, f.tgrid, f.n_paths, opt.seed, Engine::analytic, eo);

  double worst = 0.0;
  for (std::size_t j = 0; j < rep.times.size(); ++j) {
    const Decomposition d = decompose_uncertainty(rep, j);
    const double resid = d.dx_total * d.dx_total - d.dx_qu * d.dx_qu - d.dx_cl_sample * d.dx_cl_sample;
    worst = std::max(worst, std::abs(resid) / (d.dx_total * d.dx_total));
  }
  r.metrics.push_back(detail::at_most("max relative |dx_total^2 - dx_qu^2 - dx_cl^2|", worst,
                                      4.0 * std::numeric_limits<double>::epsilon()));

  // Analytic widths: bit-identical across every path.
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < f.n_paths; ++i) {
    const auto path = make_white_noise(f.params, f.tgrid, rep.seeds[i]);
    const PathResult pr = run_path(Engine::analytic, path, f.params, f.packet, eo);
    if (pr.width != rep.width_qu) ++mismatched;
  }
  r.metrics.push_back(detail::at_most("analytic paths with width != width_qu (bitwise)", static_cast<double>(mismatched), 0.0));

  // Solver subsample: 50 paths at reduced spatial resolution.
  EnsembleOptions so = eo;
  so.xgrid = SpatialGrid(-32.0, 32.0, 512);
  so.width_tol = std::numeric_limits<double>::infinity();
  const std::size_t n_solver = 50;
  std::vector<PathResult> solver_paths(n_solver);
  ckb::detail::parallel_for(n_solver, opt.workers, [&](std::size_t i) {
    solver_paths[i] = run_path(Engine::solver, make_white_noise(f.params, f.tgrid, rep.seeds[i]), f.params, f.packet, so);
  });
  double spread = 0.0;
  double vs_analytic = 0.0;
  double center_gap = 0.0;
  for (std::size_t i = 0; i < n_solver; ++i) {
    const auto path = make_white_noise(f.params, f.tgrid, rep.seeds[i]);
    const PathResult an = run_path(Engine::analytic, path, f.params, f.packet, eo);
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
      spread = std::max(spread, std::abs(solver_paths[i].width[j] - solver_paths[0].width[j]));
      vs_analytic = std::max(vs_analytic, std::abs(solver_paths[i].width[j] - an.width[j]));
      center_gap = std::max(center_gap, std::abs(solver_paths[i].center[j] - an.center[j]));
    }
  }
  r.metrics.push_back(detail::at_most("solver width spread across 50 paths", spread, 1e-8));
  r.metrics.push_back(detail::at_most("solver vs analytic width, 50 paths", vs_analytic, 1e-5));
  r.metrics.push_back(detail::at_most("solver vs analytic center, 50 paths", center_gap, 1e-3));
  return r;
}

inline CheckResult solver_kernel_equivalence(const Options& opt) {
  CheckResult r{6, "solver-kernel per-path equivalence", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 1.0);
  const GaussianPacket pk(1.0);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const TimeGrid coarse(5.0, 500);
  constexpr double C = 1.0;
  const std::size_t n_paths = 10;

  std::vector<std::array<double, 3>> errs(n_paths);
  ckb::detail::parallel_for(n_paths, opt.workers, [&](std::size_t i) {
    const auto base = make_white_noise(p, coarse, path_seed(opt.seed, 1000 + i));
    for (std::size_t level = 0; level < 3; ++level) {
      const auto path = refine(base, std::size_t{1} << level);
      const SolverRun s = detail::solve(pk, path, p, xg);
      const Trajectory tr = integrate(path, p);
      double e = 0.0;
      for (std::size_t j = 0; j < tr.x.size(); ++j) e = std::max(e, std::abs(s.obs[j].mean_x - tr.x[j]));
      errs[i][level] = e;
    }
  });
  double worst_ratio = 0.0;
  double min_order = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_paths; ++i) {
    for (std::size_t level = 0; level < 3; ++level) {
      const double dt = coarse.dt() / static_cast<double>(1u << level);
      worst_ratio = std::max(worst_ratio, errs[i][level] / (C * dt * dt));
    }
    min_order = std::min({min_order, std::log2(errs[i][0] / errs[i][1]), std::log2(errs[i][1] / errs[i][2])});
  }
  r.metrics.push_back(detail::at_most("max_t |<x>_solver - x_langevin| / (C dt^2), C=1", worst_ratio, 1.0));
  r.metrics.push_back(detail::at_least("min measured order under dt halving", min_order, 1.9));

  const TimeGrid tg(5.0, 4096);
  const auto zero = make_zero_force(tg);
  const SolverRun s = detail::solve(pk, zero, p, xg, {tg.n_steps()});
  const PathIntegrals in = compute_path_integrals(zero, p);
  const WaveField exact = evolve_gaussian(pk, in, p, tg.n_steps(), xg);
  r.metrics.push_back(detail::at_most("zero path: phase-aligned max |psi_solver - psi_exact|",
                                      detail::phase_aligned_error(exact, s.snapshots.front(), pk.x0()), 1e-5));
  return r;
}

inline CheckResult unitarity_convergence(const Options& opt) {
  CheckResult r{7, "unitarity and Strang convergence", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 1.0);
  const GaussianPacket pk(1.0);
  const SpatialGrid xg(-32.0, 32.0, 1024);

  const TimeGrid long_grid(10.0, 10000);
  const auto path = make_white_noise(p, long_grid, path_seed(opt.seed, 77));
  SplitStepSolver solver(init_state(pk, xg), path, p);
  double prev = solver.observe().norm;
  const double start = prev;
  double per_step = 0.0;
  while (solver.node() < long_grid.n_steps()) {
    solver.step();
    const double now = solver.observe().norm;
    per_step = std::max(per_step, std::abs(now - prev));
    prev = now;
  }
  r.metrics.push_back(detail::at_most("cumulative norm drift over 1e4 steps", std::abs(prev - start), 1e-9));
  r.metrics.push_back(detail::at_most("max per-step norm change", per_step, 1e-13));

  const PhysicalParams p0(1.0, 1.0, 0.0);
  const double expect = gaussian_width(1.0, 1.0, tau_of_t(1.0, 5.0));
  double errs[3];
  for (int level = 0; level < 3; ++level) {
    const TimeGrid tg(5.0, std::size_t{64} << level);
    const SolverRun s = detail::solve(pk, make_zero_force(tg), p0, xg);
    errs[level] = std::abs(std::sqrt(s.obs.back().var_x) - expect);
  }
  const double o1 = std::log2(errs[0] / errs[1]);
  const double o2 = std::log2(errs[1] / errs[2]);
  r.metrics.push_back(detail::at_most("|order(64->128) - 2|", std::abs(o1 - 2.0), 0.1));
  r.metrics.push_back(detail::at_most("|order(128->256) - 2|", std::abs(o2 - 2.0), 0.1));
  return r;
}

inline CheckResult propagator_properties(const Options& opt) {
  CheckResult r{8, "propagator composition and packet evolution", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 1.0);
  const GaussianPacket pk(1.0);
  const TimeGrid tg(1.0, 2000);
  const auto path = make_white_noise(p, tg, path_seed(opt.seed, 5));
  const PathIntegrals in = compute_path_integrals(path, p);
  const std::size_t mid = 1000;
  const std::size_t end = 2000;

  const double h = 0.005;
  std::vector<double> xs;
  for (double x = -10.0; x <= 10.0 + 1e-12; x += h) xs.push_back(x);
  std::vector<Complex> psi0(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    psi0[i] = std::pow(2.0 * M_PI, -0.25) * std::exp(-xs[i] * xs[i] / 4.0);

  const KernelIncrement to_mid = increment_from_origin(in, mid);
  const KernelIncrement to_end = increment_from_origin(in, end);
  const KernelIncrement mid_to_end = rebase(in, p.m(), p.gamma(), mid, end);

  std::vector<Complex> psi_mid(xs.size());
  ckb::detail::parallel_for(xs.size(), opt.workers, [&](std::size_t i) {
    psi_mid[i] = detail::apply_kernel(xs, psi0, h, [&](double xp) { return propagator(xs[i], xp, to_mid, p.m()); });
  });

  const SpatialGrid probe(-4.0, 4.0, 32);
  const WaveField exact_end = evolve_gaussian(pk, in, p, end, probe);
  const WaveField exact_mid = evolve_gaussian(pk, in, p, mid, probe);
  double comp = 0.0;
  double direct = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double x = probe.x(k);
    const Complex two_step =
        detail::apply_kernel(xs, psi_mid, h, [&](double xp) { return propagator(x, xp, mid_to_end, p.m()); });
    const Complex one_step =
        detail::apply_kernel(xs, psi0, h, [&](double xp) { return propagator(x, xp, to_end, p.m()); });
    comp = std::max(comp, std::abs(two_step - one_step));
    direct = std::max(direct, std::abs(one_step - exact_end.values[k]));
    const Complex at_mid =
        detail::apply_kernel(xs, psi0, h, [&](double xp) { return propagator(x, xp, to_mid, p.m()); });
    direct = std::max(direct, std::abs(at_mid - exact_mid.values[k]));
  }
  r.metrics.push_back(detail::at_most("composition G(t|t')G(t'|0) vs G(t|0), max error", comp, 1e-4));
  r.metrics.push_back(detail::at_most("G applied to packet vs evolve_gaussian, max error", direct, 1e-6));
  return r;
}

inline CheckResult discrete_completeness(const Options& opt) {
  CheckResult r{9, "discrete plane-wave orthonormality and completeness", {}, {}, {}};
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(2.0, 400);
  const auto path = make_white_noise(p, tg, path_seed(opt.seed, 9));
  const PathIntegrals in = compute_path_integrals(path, p);
  const SpatialGrid xg(-10.0, 10.0, 64);
  const std::size_t n = xg.size();
  const double dk = 2.0 * M_PI / xg.length();
  const std::size_t j = tg.n_steps();

  std::vector<std::vector<Complex>> modes(n, std::vector<Complex>(n));
  for (std::size_t a = 0; a < n; ++a) {
    const double k = dk * (static_cast<double>(a) - static_cast<double>(n / 2));
    for (std::size_t b = 0; b < n; ++b) modes[a][b] = plane_wave(k, xg.x(b), in, p, j);
  }
  double ortho = 0.0;
  double complete = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      Complex s_k = 0.0;
      Complex s_x = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        s_k += std::conj(modes[a][c]) * modes[b][c];
        s_x += modes[c][a] * std::conj(modes[c][b]);
      }
      const double delta = a == b ? 1.0 : 0.0;
      ortho = std::max(ortho, std::abs(s_k * xg.dx() * dk - delta));
      complete = std::max(complete, std::abs(s_x * dk * xg.dx() - delta));
    }
  }
  r.metrics.push_back(detail::at_most("max |<psi_n|psi_n'> dx dk - delta|", ortho, 1e-12));
  r.metrics.push_back(detail::at_most("max |sum_n psi_n(x) psi_n*(x') dk dx - delta|", complete, 1e-12));
  return r;
}

using Check = std::function<CheckResult(const Options&)>;

inline std::vector<Check> all_checks() {
  return {width_freeze,        undamped_limit,        constant_force_ehrenfest,
          classical_diffusion, decomposition,         solver_kernel_equivalence,
          unitarity_convergence, propagator_properties, discrete_completeness};
}

/// Runs a check, turning exceptions into a failed result.
inline CheckResult run_check(const Check& check, const Options& opt, int id) {
  try {
    return check(opt);
  } catch (const std::exception& e) {
    CheckResult r{id, "check " + std::to_string(id), {}, {}, e.what()};
    return r;
  }
}

}  // namespace ckb::verify
