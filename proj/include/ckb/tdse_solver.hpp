#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ckb/core_types.hpp"

namespace ckb {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Observables {
  double norm = 0.0;
  double mean_x = 0.0;
  double var_x = 0.0;
};

/// Rectangle-rule moments of |psi|^2 on the periodic grid. Mean and variance
/// are normalized by the discrete norm.
inline Observables observables(std::span<const Complex> values, const SpatialGrid& grid) {
  Observables o;
  double sx = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double w = std::norm(values[k]);
    o.norm += w;
    sx += w * grid.x(k);
  }
  const double mean = sx / o.norm;
  double sv = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double d = grid.x(k) - mean;
    sv += std::norm(values[k]) * d * d;
  }
  o.mean_x = mean;
  o.var_x = sv / o.norm;
  o.norm *= grid.dx();
  return o;
}

inline Observables observables(const WaveField& state) { return observables(state.values, state.grid); }

/// Samples the initial Gaussian on the grid and renormalizes to unit discrete
/// norm. Throws ConfigError if 8 sigma0 on either side of x0 leaves the domain.
inline WaveField init_state(const GaussianPacket& packet, const SpatialGrid& xgrid) {
  const double s = packet.sigma0();
  if (packet.x0() - 8.0 * s < xgrid.x_min() || packet.x0() + 8.0 * s > xgrid.x_max())
    throw ConfigError("packet too wide for the domain: need 8 sigma0 on each side of x0");
  WaveField out{xgrid, std::vector<Complex>(xgrid.size()), 0.0};
  const double amp = std::pow(2.0 * M_PI * s * s, -0.25);
  for (std::size_t k = 0; k < xgrid.size(); ++k) {
    const double d = xgrid.x(k) - packet.x0();
    out.values[k] = amp * std::exp(-d * d / (4.0 * s * s));
  }
  const double scale = 1.0 / std::sqrt(out.norm());
  for (auto& v : out.values) v *= scale;
  return out;
}

namespace detail {

// The FFTW planner is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

struct FftwBufferDeleter {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

enum class SplittingScheme { strang };

struct SolverConfig {
  SpatialGrid xgrid;
  TimeGrid tgrid;
  SplittingScheme scheme = SplittingScheme::strang;
  double norm_tol = 1e-8;
  std::vector<std::size_t> snapshot_nodes;
};

/// Split-step Fourier integrator for
///   i dpsi/dt = [ e^{-gamma t} p^2 / 2m - e^{gamma t} F(t) x ] psi
/// on a periodic grid.
///
/// The state is held as psi = e^{i K x} phi. Each step is the Strang product
/// half-kick / kinetic / half-kick with coefficients at the interval midpoint.
/// A kick exp(i b x dt/2) is exact in continuous x and only shifts the
/// canonical momentum offset K; the kinetic factor acts on phi in wavenumber
/// space as exp(-i a dt (q + K)^2 / 2m). This keeps the canonical momentum,
/// which grows like e^{gamma t}, off the grid.
class SplitStepSolver {
 public:
  SplitStepSolver(const WaveField& initial, NoisePath path, const PhysicalParams& params, std::size_t start_node = 0)
      : grid_(initial.grid), path_(std::move(path)), params_(params), j_(start_node) {
    if (initial.values.size() != grid_.size()) throw ConfigError("wave field size does not match its grid");
    if (start_node > path_.grid().n_steps()) throw std::out_of_range("start node beyond time grid");
    const auto n = grid_.size();
    buf_.reset(fftw_alloc_complex(n));
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      const int ni = static_cast<int>(n);
      forward_.reset(fftw_plan_dft_1d(ni, buf_.get(), buf_.get(), FFTW_FORWARD, FFTW_ESTIMATE));
      backward_.reset(fftw_plan_dft_1d(ni, buf_.get(), buf_.get(), FFTW_BACKWARD, FFTW_ESTIMATE));
    }
    if (!forward_ || !backward_) throw SolverError("FFTW plan creation failed");
    phi_.assign(initial.values.begin(), initial.values.end());
    q_.resize(n);
    for (std::size_t k = 0; k < n; ++k) q_[k] = grid_.wavenumber(k);
  }

  std::size_t node() const { return j_; }
  double time() const { return path_.grid().node(j_); }
  /// Accumulated canonical momentum offset K.
  double momentum_offset() const { return K_; }

  /// Advances one step from node j to j+1.
  void step() {
    const TimeGrid& g = path_.grid();
    if (j_ >= g.n_steps()) throw std::out_of_range("step: already at the final node");
    const double dt = g.dt();
    const double t_mid = g.node(j_) + 0.5 * dt;
    const double gamma = params_.gamma();
    const double kick = std::exp(gamma * t_mid) * path_[j_] * dt;
    const double kin = std::exp(-gamma * t_mid) * dt / (2.0 * params_.m());

    K_ += 0.5 * kick;

    const std::size_t n = grid_.size();
    auto* b = reinterpret_cast<Complex*>(buf_.get());
    std::copy(phi_.begin(), phi_.end(), b);
    fftw_execute(forward_.get());
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double p = q_[k] + K_;
      b[k] *= std::polar(inv_n, -kin * p * p);
    }
    fftw_execute(backward_.get());
    std::copy(b, b + n, phi_.begin());

    K_ += 0.5 * kick;
    ++j_;
  }

  /// Canonical-gauge wave function psi(x_k) = e^{i K x_k} phi_k.
  WaveField field() const {
    WaveField out{grid_, std::vector<Complex>(grid_.size()), time()};
    for (std::size_t k = 0; k < grid_.size(); ++k) out.values[k] = std::polar(1.0, K_ * grid_.x(k)) * phi_[k];
    return out;
  }

  Observables observe() const { return observables(phi_, grid_); }

  /// Expectation of the canonical momentum, K + <q>_phi.
  double mean_momentum() const {
    const std::size_t n = grid_.size();
    auto* b = reinterpret_cast<Complex*>(buf_.get());
    std::copy(phi_.begin(), phi_.end(), b);
    fftw_execute(forward_.get());
    double w = 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double a = std::norm(b[k]);
      w += a;
      s += a * q_[k];
    }
    return K_ + s / w;
  }

 private:
  SpatialGrid grid_;
  NoisePath path_;
  PhysicalParams params_;
  std::size_t j_;
  double K_ = 0.0;
  std::vector<Complex> phi_;
  std::vector<double> q_;
  std::unique_ptr<fftw_complex, detail::FftwBufferDeleter> buf_;
  std::unique_ptr<fftw_plan_s, detail::FftwPlanDeleter> forward_;
  std::unique_ptr<fftw_plan_s, detail::FftwPlanDeleter> backward_;
};

/// One split step of a canonical-gauge field from node j to j+1.
inline WaveField step(const WaveField& state, const NoisePath& path, const PhysicalParams& params, std::size_t j) {
  if (j >= path.grid().n_steps()) throw std::out_of_range("step: j must be < n_steps");
  SplitStepSolver s(state, path, params, j);
  s.step();
  return s.field();
}

struct SolverRun {
  std::vector<double> times;
  std::vector<Observables> obs;
  std::vector<WaveField> snapshots;
  double max_norm_drift = 0.0;
};

/// Integrates from the initial packet over the whole time grid, recording
/// observables at every node and snapshots at the configured nodes. Aborts
/// with SolverError on norm drift beyond config.norm_tol or non-finite values.
inline SolverRun run(const GaussianPacket& packet, const NoisePath& path, const PhysicalParams& params,
                     const SolverConfig& config) {
  if (!(path.grid() == config.tgrid)) throw ConfigError("solver time grid does not match the noise path grid");
  for (std::size_t s : config.snapshot_nodes)
    if (s > config.tgrid.n_steps()) throw ConfigError("snapshot node beyond the time grid");

  SplitStepSolver solver(init_state(packet, config.xgrid), path, params);
  SolverRun out;
  out.times = config.tgrid.nodes();
  out.obs.reserve(config.tgrid.n_nodes());

  auto record = [&] {
    const Observables o = solver.observe();
    if (!std::isfinite(o.norm) || !std::isfinite(o.mean_x) || !std::isfinite(o.var_x))
      throw SolverError("non-finite state at t = " + std::to_string(solver.time()));
    const double drift = std::abs(o.norm - 1.0);
    out.max_norm_drift = std::max(out.max_norm_drift, drift);
    if (drift > config.norm_tol)
      throw SolverError("norm drift " + std::to_string(drift) + " exceeds tolerance at t = " +
                        std::to_string(solver.time()));
    out.obs.push_back(o);
    for (std::size_t s : config.snapshot_nodes)
      if (s == solver.node()) out.snapshots.push_back(solver.field());
  };

  record();
  while (solver.node() < config.tgrid.n_steps()) {
    solver.step();
    record();
  }
  return out;
}

}  // namespace ckb
