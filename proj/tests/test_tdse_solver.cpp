#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ckb/kernels.hpp"
#include "ckb/langevin.hpp"
#include "ckb/noise.hpp"
#include "ckb/tdse_solver.hpp"

using namespace ckb;

namespace {

double max_density_gap(const WaveField& a, const WaveField& b) {
  double e = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) e = std::max(e, std::abs(std::norm(a.values[k]) - std::norm(b.values[k])));
  return e;
}

SolverConfig config_for(const SpatialGrid& xg, const TimeGrid& tg) {
  return SolverConfig{xg, tg, SplittingScheme::strang, 1e-8, {}};
}

}  // namespace

TEST(InitState, NormalizedGaussianOnGrid) {
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const auto s = init_state(GaussianPacket(1.0), xg);
  EXPECT_NEAR(s.norm(), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(s.values[512]), std::pow(2.0 * M_PI, -0.25), 1e-12);
  const auto o = observables(s);
  EXPECT_NEAR(o.mean_x, 0.0, 1e-12);
  EXPECT_NEAR(o.var_x, 1.0, 1e-8);
}

TEST(InitState, RejectsPacketTooWide) {
  try {
    init_state(GaussianPacket(5.0), SpatialGrid(-32.0, 32.0, 1024));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("too wide"), std::string::npos);
  }
}

TEST(Observables, InvariantUnderLocalPhase) {
  const SpatialGrid xg(-16.0, 16.0, 256);
  auto s = init_state(GaussianPacket(0.7, 1.5), xg);
  const auto before = observables(s);
  for (std::size_t k = 0; k < xg.size(); ++k) s.values[k] *= std::polar(1.0, 3.0 * xg.x(k) * xg.x(k) - 0.4);
  const auto after = observables(s);
  EXPECT_DOUBLE_EQ(before.norm, after.norm);
  EXPECT_DOUBLE_EQ(before.mean_x, after.mean_x);
  EXPECT_DOUBLE_EQ(before.var_x, after.var_x);
}

TEST(Step, GridPlaneWaveAcquiresFreePhase) {
  const SpatialGrid xg(-8.0, 8.0, 64);
  const TimeGrid tg(1.0, 10);
  const double q0 = xg.wavenumber(5);
  const double m = 1.5;
  WaveField s{xg, std::vector<Complex>(xg.size()), 0.0};
  for (std::size_t k = 0; k < xg.size(); ++k) s.values[k] = std::polar(1.0, q0 * xg.x(k));
  const auto out = step(s, make_zero_force(tg), PhysicalParams(m, 0.0, 0.0), 0);
  const Complex expect = std::polar(1.0, -q0 * q0 * tg.dt() / (2.0 * m));
  for (std::size_t k = 0; k < xg.size(); ++k) EXPECT_LT(std::abs(out.values[k] - expect * s.values[k]), 1e-13);
}

TEST(Step, PreservesNormPerStep) {
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(5.0, 500);
  const auto path = make_white_noise(p, tg, 3);
  SplitStepSolver solver(init_state(GaussianPacket(1.0), SpatialGrid(-32.0, 32.0, 1024)), path, p);
  double prev = solver.observe().norm;
  while (solver.node() < tg.n_steps()) {
    solver.step();
    const double now = solver.observe().norm;
    ASSERT_LE(std::abs(now - prev), 1e-13) << "node " << solver.node();
    prev = now;
  }
}

TEST(Step, MomentumGainsMidpointImpulse) {
  const PhysicalParams p(1.0, 0.5, 0.0);
  const TimeGrid tg(2.0, 40);
  const auto path = make_constant_force(0.9, tg);
  SplitStepSolver solver(init_state(GaussianPacket(1.0), SpatialGrid(-20.0, 20.0, 512)), path, p);
  for (std::size_t j = 0; j < 10; ++j) {
    const double before = solver.mean_momentum();
    const double t_mid = tg.node(j) + 0.5 * tg.dt();
    solver.step();
    EXPECT_NEAR(solver.mean_momentum() - before, std::exp(p.gamma() * t_mid) * 0.9 * tg.dt(), 1e-12);
  }
}

TEST(Step, FieldIsCanonicalGauge) {
  // Stepping the exported field in one go must reproduce the running solver.
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(1.0, 20);
  const auto path = make_white_noise(p, tg, 8);
  SplitStepSolver solver(init_state(GaussianPacket(1.0), SpatialGrid(-16.0, 16.0, 256)), path, p);
  for (int i = 0; i < 5; ++i) solver.step();
  const auto restarted = step(solver.field(), path, p, solver.node());
  solver.step();
  const auto cont = solver.field();
  for (std::size_t k = 0; k < cont.values.size(); ++k) EXPECT_LT(std::abs(cont.values[k] - restarted.values[k]), 1e-12);
}

TEST(Run, ZeroForceWidthMatchesAnalytic) {
  const PhysicalParams p(1.0, 1.0, 0.0);
  const TimeGrid tg(5.0, 4096);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const auto r = run(GaussianPacket(1.0), make_zero_force(tg), p, config_for(xg, tg));
  for (std::size_t j = 0; j < tg.n_nodes(); j += 256) {
    const double w = gaussian_width(1.0, 1.0, tau_of_t(p.gamma(), tg.node(j)));
    EXPECT_NEAR(std::sqrt(r.obs[j].var_x), w, 1e-6) << "t=" << tg.node(j);
  }
  EXPECT_LE(r.max_norm_drift, 1e-12);
}

TEST(Run, ConstantForceCenterFollowsNewton) {
  const PhysicalParams p(1.0, 1.0, 0.0);
  const TimeGrid tg(5.0, 4096);
  const auto path = make_constant_force(1.0, tg);
  const auto r = run(GaussianPacket(1.0), path, p, config_for(SpatialGrid(-32.0, 32.0, 1024), tg));
  const auto tr = integrate(path, p);
  for (std::size_t j = 0; j < tg.n_nodes(); j += 256) EXPECT_NEAR(r.obs[j].mean_x, tr.x[j], 1e-6) << "j=" << j;
}

TEST(Run, WhiteNoiseCenterConvergesAtSecondOrder) {
  const PhysicalParams p(1.0, 1.0, 1.0);
  const auto base = make_white_noise(p, TimeGrid(2.0, 64), 21);
  const auto tr = integrate(base, p);
  const SpatialGrid xg(-32.0, 32.0, 512);
  double prev = 0.0;
  for (std::size_t f : {1u, 2u, 4u}) {
    const auto fine = refine(base, f);
    const auto r = run(GaussianPacket(1.0), fine, p, config_for(xg, fine.grid()));
    const double err = std::abs(r.obs.back().mean_x - tr.x.back());
    if (prev > 0.0) {
      EXPECT_NEAR(prev / err, 4.0, 0.4) << "factor " << f;
    }
    prev = err;
  }
}

TEST(Run, DensityMatchesClosedFormPacket) {
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(5.0, 4096);
  const SpatialGrid xg(-32.0, 32.0, 1024);
  const auto path = make_white_noise(p, tg, 4);
  const std::size_t last = tg.n_steps();
  SolverConfig cfg = config_for(xg, tg);
  cfg.snapshot_nodes = {last / 2, last};
  const auto r = run(GaussianPacket(1.0), path, p, cfg);
  ASSERT_EQ(r.snapshots.size(), 2u);
  const auto in = compute_path_integrals(path, p);
  EXPECT_LE(max_density_gap(r.snapshots[0], evolve_gaussian(GaussianPacket(1.0), in, p, last / 2, xg)), 1e-5);
  EXPECT_LE(max_density_gap(r.snapshots[1], evolve_gaussian(GaussianPacket(1.0), in, p, last, xg)), 1e-5);
}

TEST(Run, WidthIndependentOfNoiseRealization) {
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(5.0, 1024);
  const SpatialGrid xg(-32.0, 32.0, 512);
  const auto a = run(GaussianPacket(1.0), make_white_noise(p, tg, 1), p, config_for(xg, tg));
  const auto b = run(GaussianPacket(1.0), make_white_noise(p, tg, 2), p, config_for(xg, tg));
  for (std::size_t j = 0; j < tg.n_nodes(); ++j) ASSERT_NEAR(a.obs[j].var_x, b.obs[j].var_x, 1e-8) << "j=" << j;
}

TEST(Run, AbortsWhenNormDriftExceedsTolerance) {
  const PhysicalParams p(1.0, 1.0, 1.0);
  const TimeGrid tg(1.0, 100);
  SolverConfig cfg = config_for(SpatialGrid(-16.0, 16.0, 256), tg);
  cfg.norm_tol = 1e-300;
  EXPECT_THROW(run(GaussianPacket(1.0), make_white_noise(p, tg, 1), p, cfg), SolverError);
}

TEST(Run, AbortsOnNonFiniteState) {
  const PhysicalParams p(1.0, 1.0, 0.0);
  const TimeGrid tg(1.0, 10);
  std::vector<double> s(tg.n_nodes(), 0.0);
  s[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(run(GaussianPacket(1.0), make_custom(s, tg), p, config_for(SpatialGrid(-16.0, 16.0, 256), tg)),
               SolverError);
}

TEST(Run, RejectsMismatchedGridsAndSnapshots) {
  const PhysicalParams p(1.0, 1.0, 0.0);
  const SpatialGrid xg(-16.0, 16.0, 256);
  EXPECT_THROW(run(GaussianPacket(1.0), make_zero_force(TimeGrid(1.0, 10)), p, config_for(xg, TimeGrid(1.0, 20))),
               ConfigError);
  SolverConfig cfg = config_for(xg, TimeGrid(1.0, 10));
  cfg.snapshot_nodes = {11};
  EXPECT_THROW(run(GaussianPacket(1.0), make_zero_force(cfg.tgrid), p, cfg), ConfigError);
}
