#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "stochlab/kernels.hpp"
#include "stochlab/noise.hpp"

namespace stochlab {

enum class TestFamily {
  ParabolicHolder,  ///< A (|x|^beta + t^{beta/2})
  SpatialHolder,    ///< A |x|^beta
  Constant,         ///< A
  Zero,
};

/// Mark factor g1 of a mark-dependent coefficient g(t, x, z) = g0(t, x) g1(z).
enum class MarkFactor { Identity, Absolute, Unit };

/// Deterministic coefficient g0(t, x) = spatial(x) + temporal(t).
struct TestFunctionSpec {
  TestFamily family = TestFamily::ParabolicHolder;
  double beta = 0.5;
  double amplitude = 1.0;
  MarkFactor mark = MarkFactor::Identity;

  void validate() const;
  bool time_dependent() const noexcept { return family == TestFamily::ParabolicHolder; }
  double spatial(std::span<const double> x) const;
  double temporal(double t) const;
  double operator()(double t, std::span<const double> x) const { return spatial(x) + temporal(t); }
  double mark_factor(double z) const;
};

/// Stored part of the lattice: points with |x|_inf <= half_width on a stride through x = 0.
struct WindowSpec {
  double half_width = 0.0;  ///< 0 selects the central half, L/2
  int stride = 1;
};

enum class Execution { Serial, Parallel };

/// Phi_{i,k}(x) = [p(lag) * g0(r_k, .)](x) on the window, lag = (i-k) dt, except dt/2 for i-k = 1.
/// Since g0 = spatial + temporal, Phi_{i,k} = S_{i-k}(x) + temporal(r_k) m_{i-k} with m the
/// kernel's lattice mass.
class PropagatorTable {
 public:
  PropagatorTable(const KernelSpec& kernel, const SpectralGrid& grid, const TestFunctionSpec& g,
                  int steps, double dt, const WindowSpec& window);

  int steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  double lag_time(int lag) const noexcept { return lag == 1 ? 0.5 * dt_ : lag * dt_; }
  const std::vector<int>& axis_indices() const noexcept { return axis_; }
  std::size_t window_size() const noexcept { return window_size_; }
  std::span<const double> spatial(int lag) const;
  double mass(int lag) const { return mass_[lag]; }
  double temporal(int k) const { return temporal_[k]; }
  /// Phi_{i,k}(w); zero unless k < i.
  double value(int i, int k, std::size_t w) const;

 private:
  int steps_;
  double dt_;
  std::vector<int> axis_;
  std::size_t window_size_ = 0;
  std::vector<double> spatial_;  // (steps + 1) x window, row 0 unused
  std::vector<double> mass_;
  std::vector<double> temporal_;
};

/// Lattice indices along one axis kept by the window.
std::vector<int> window_axis(const SpectralGrid& grid, const WindowSpec& window);

/// M realizations of u on {t_i = i dt} x window, stored [m][i][w].
struct FieldEnsemble {
  SpectralGrid grid{1.0, 2, 1};
  KernelSpec kernel;
  NoiseSpec noise;
  TestFunctionSpec g;
  WindowSpec window;
  std::vector<int> axis;
  int realizations = 0;
  std::vector<double> values;

  int steps() const noexcept { return noise.steps; }
  double dt() const noexcept { return noise.dt(); }
  double time(int i) const noexcept { return i * dt(); }
  std::size_t window_size() const noexcept;
  std::size_t slab() const noexcept { return (steps() + 1) * window_size(); }
  double at(int m, int i, std::size_t w) const { return values[m * slab() + i * window_size() + w]; }
  /// Spatial coordinates of window point w (second entry 0 in 1D).
  std::array<double, 2> position(std::size_t w) const;
  /// Window point at x; PairOffGrid if x is not a stored lattice point.
  std::size_t window_index(std::span<const double> x) const;
  /// Time index of t; PairOffGrid if t is not a lattice time.
  int time_index(double t) const;
};

/// Per-step drivers: dW_k, or sum of g1(z) over events in [t_k, t_{k+1}) minus dt * int g1 dnu.
std::vector<double> step_drivers(const NoisePath& path, const TestFunctionSpec& g,
                                 double compensator_per_step);

/// Variance of one step driver: dt, or dt * int g1^2 dnu.
double driver_variance(const NoiseSpec& noise, const TestFunctionSpec& g);

FieldEnsemble convolve_brownian(const KernelSpec& kernel, const SpectralGrid& grid,
                                const TestFunctionSpec& g, const NoiseSpec& noise, int realizations,
                                const WindowSpec& window = {},
                                Execution execution = Execution::Parallel);

FieldEnsemble convolve_poisson(const KernelSpec& kernel, const SpectralGrid& grid,
                               const TestFunctionSpec& g, const NoiseSpec& noise, int realizations,
                               const WindowSpec& window = {},
                               Execution execution = Execution::Parallel);

/// Exact E|u(t_i, w_x) - u(t_j, w_y)|^2 of the discrete scheme (isometry, no sampling).
double isometry_second_moment(const PropagatorTable& table, double driver_var, int i,
                              std::size_t wx, int j, std::size_t wy);

/// Rebuilds the propagator table an ensemble was generated with.
PropagatorTable propagators_for(const FieldEnsemble& ensemble);

/// <prefix>.bin (raw little-endian doubles) and <prefix>.json (shape, grid, specs, seed).
void save_ensemble(const FieldEnsemble& ensemble, const std::filesystem::path& prefix);
FieldEnsemble load_ensemble(const std::filesystem::path& prefix);

/// "t,x,u" (or "t,x1,x2,u") rows for realization m.
void write_realization_csv(std::ostream& out, const FieldEnsemble& ensemble, int m);

}  // namespace stochlab
