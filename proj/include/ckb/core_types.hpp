#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// Quantum Brownian motion of a free particle under the Caldirola-Kanai
/// Hamiltonian. Units: hbar = 1 throughout.
namespace ckb {

using Complex = std::complex<double>;

/// Raised for invalid parameters or grids. The message names the violated
/// constraint.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Particle and bath constants. gamma is always derived as eta/m.
class PhysicalParams {
 public:
  PhysicalParams(double m, double eta, double D) : m_(m), eta_(eta), D_(D) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("mass must be positive");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("damping eta must be non-negative");
    if (!(D >= 0.0) || !std::isfinite(D)) throw ConfigError("noise strength D must be non-negative");
    gamma_ = eta_ / m_;
  }

  double m() const { return m_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }
  double D() const { return D_; }

 private:
  double m_;
  double eta_;
  double gamma_;
  double D_;
};

/// Uniform time grid t_j = j*dt, j = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(double t_end, std::size_t n_steps) : t_end_(t_end), n_steps_(n_steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be positive");
    if (n_steps < 1) throw ConfigError("time grid must have at least one step");
    dt_ = t_end_ / static_cast<double>(n_steps_);
  }

  double t_end() const { return t_end_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double dt() const { return dt_; }
  double node(std::size_t j) const { return static_cast<double>(j) * dt_; }

  /// Index of the node closest to t, clamped to the grid.
  std::size_t nearest(double t) const {
    if (t <= 0.0) return 0;
    const double j = std::round(t / dt_);
    return j >= static_cast<double>(n_steps_) ? n_steps_ : static_cast<std::size_t>(j);
  }

  std::vector<double> nodes() const {
    std::vector<double> out(n_nodes());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = node(j);
    return out;
  }

  bool operator==(const TimeGrid& o) const { return t_end_ == o.t_end_ && n_steps_ == o.n_steps_; }

 private:
  double t_end_;
  std::size_t n_steps_;
  double dt_;
};

/// Periodic spatial grid: node k sits at x_min + k*dx, x_max excluded.
class SpatialGrid {
 public:
  SpatialGrid(double x_min, double x_max, std::size_t n_points)
      : x_min_(x_min), x_max_(x_max), n_points_(n_points) {
    if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min))
      throw ConfigError("spatial domain requires x_max > x_min");
    if (n_points < 8) throw ConfigError("spatial grid needs at least 8 points");
    dx_ = (x_max_ - x_min_) / static_cast<double>(n_points_);
  }

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double length() const { return x_max_ - x_min_; }
  std::size_t size() const { return n_points_; }
  double dx() const { return dx_; }
  double x(std::size_t k) const { return x_min_ + static_cast<double>(k) * dx_; }

  /// Angular wavenumber of FFT bin k (standard ordering: 0, 1, ..., -1).
  double wavenumber(std::size_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(n_points_);
    auto s = static_cast<std::ptrdiff_t>(k);
    if (s >= (n + 1) / 2) s -= n;
    return 2.0 * M_PI * static_cast<double>(s) / length();
  }

  std::size_t nearest(double x) const {
    const double k = std::round((x - x_min_) / dx_);
    if (k <= 0.0) return 0;
    if (k >= static_cast<double>(n_points_ - 1)) return n_points_ - 1;
    return static_cast<std::size_t>(k);
  }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_points_;
  double dx_;
};

enum class NoiseKind { white, constant, zero, custom };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::constant: return "constant";
    case NoiseKind::zero: return "zero";
    case NoiseKind::custom: return "custom";
  }
  return "?";
}

struct NoiseMeta {
  NoiseKind kind = NoiseKind::zero;
  double D = 0.0;
  std::uint64_t seed = 0;
};

/// Force realization F(t), piecewise constant on each interval [t_j, t_j+1)
/// with the left-node value. The last sample (t = t_end) is carried for
/// completeness and never enters an interval.
class NoisePath {
 public:
  NoisePath(TimeGrid grid, std::vector<double> samples, NoiseMeta meta)
      : grid_(grid), samples_(std::move(samples)), meta_(meta) {
    if (samples_.size() != grid_.n_nodes())
      throw ConfigError("noise path length " + std::to_string(samples_.size()) +
                        " does not match grid node count " + std::to_string(grid_.n_nodes()));
  }

  const TimeGrid& grid() const { return grid_; }
  std::span<const double> samples() const { return samples_; }
  double operator[](std::size_t j) const { return samples_[j]; }
  const NoiseMeta& meta() const { return meta_; }

 private:
  TimeGrid grid_;
  std::vector<double> samples_;
  NoiseMeta meta_;
};

/// Initial Gaussian (2 pi sigma0^2)^{-1/4} exp(-(x-x0)^2 / 4 sigma0^2),
/// zero mean momentum.
class GaussianPacket {
 public:
  explicit GaussianPacket(double sigma0, double x0 = 0.0) : sigma0_(sigma0), x0_(x0) {
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw ConfigError("initial width sigma0 must be positive");
    if (!std::isfinite(x0)) throw ConfigError("initial center x0 must be finite");
  }

  double sigma0() const { return sigma0_; }
  double x0() const { return x0_; }

 private:
  double sigma0_;
  double x0_;
};

struct WaveField {
  SpatialGrid grid;
  std::vector<Complex> values;
  double time = 0.0;

  double norm() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * grid.dx();
  }
};

/// Per-node statistics over an ensemble of noise realizations.
struct EnsembleReport {
  std::vector<double> times;
  std::vector<double> tau;
  std::size_t n_paths = 0;
  std::vector<double> center_mean;
  std::vector<double> center_var;
  std::vector<double> width_qu;
  std::vector<double> dx_cl_analytic;
  std::vector<double> dx_total;
  std::uint64_t base_seed = 0;
  std::vector<std::uint64_t> seeds;
};

struct ValidatedConfig {
  PhysicalParams params;
  TimeGrid tgrid;
  SpatialGrid xgrid;
  std::vector<std::string> warnings;
};

}  // namespace ckb
