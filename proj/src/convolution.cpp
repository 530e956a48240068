#include "stochlab/convolution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <exception>
#include <fstream>
#include <ostream>

#include "stochlab/error.hpp"
#include "stochlab/fft.hpp"
#include "stochlab/serialization.hpp"

namespace stochlab {

// ---------------------------------------------------------------------------
// Coefficients

void TestFunctionSpec::validate() const {
  require(beta > 0.0 && beta < 1.0, ErrorCode::InvalidArgument, "g.beta must lie in (0, 1)");
  require(std::isfinite(amplitude), ErrorCode::InvalidArgument, "g.amplitude must be finite");
}

double TestFunctionSpec::spatial(std::span<const double> x) const {
  switch (family) {
    case TestFamily::ParabolicHolder:
    case TestFamily::SpatialHolder: {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      return amplitude * std::pow(r2, 0.5 * beta);
    }
    case TestFamily::Constant:
      return amplitude;
    case TestFamily::Zero:
      return 0.0;
  }
  return 0.0;
}

double TestFunctionSpec::temporal(double t) const {
  return family == TestFamily::ParabolicHolder ? amplitude * std::pow(std::abs(t), 0.5 * beta)
                                               : 0.0;
}

double TestFunctionSpec::mark_factor(double z) const {
  switch (mark) {
    case MarkFactor::Identity:
      return z;
    case MarkFactor::Absolute:
      return std::abs(z);
    case MarkFactor::Unit:
      return 1.0;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Window and propagators

std::vector<int> window_axis(const SpectralGrid& grid, const WindowSpec& window) {
  require(window.stride >= 1, ErrorCode::InvalidArgument, "window stride must be >= 1");
  const double half = window.half_width > 0.0 ? window.half_width : 0.5 * grid.half_width();
  require(half <= grid.half_width(), ErrorCode::InvalidArgument,
          "window exceeds the periodic box");
  const int n = grid.points_per_axis();
  const int centre = n / 2;
  const double h = grid.spacing();
  const int reach = static_cast<int>(std::floor(half / (h * window.stride) + 1e-9));
  std::vector<int> axis;
  for (int k = -reach; k <= reach; ++k) {
    const int j = centre + k * window.stride;
    if (j >= 0 && j < n) axis.push_back(j);
  }
  return axis;
}

PropagatorTable::PropagatorTable(const KernelSpec& kernel, const SpectralGrid& grid,
                                 const TestFunctionSpec& g, int steps, double dt,
                                 const WindowSpec& window)
    : steps_(steps), dt_(dt) {
  kernel.validate();
  require(kernel.dim == grid.dim(), ErrorCode::GridMismatch, "kernel and grid dimensions differ");
  require(steps >= 1 && dt > 0.0, ErrorCode::InvalidArgument, "bad time stepping");
  grid.require_guard(kernel.alpha, lag_time(1));

  axis_ = window_axis(grid, window);
  const int n = grid.points_per_axis();
  const std::size_t a = axis_.size();
  window_size_ = grid.dim() == 1 ? a : a * a;

  // Lattice samples of the spatial part and their transform.
  std::vector<double> samples(grid.size());
  for (std::size_t idx = 0; idx < samples.size(); ++idx) {
    const double x[2] = {grid.coordinate(static_cast<int>(idx % n)),
                         grid.coordinate(static_cast<int>(idx / n))};
    samples[idx] = g.spatial(std::span<const double>(x, grid.dim()));
  }
  std::vector<std::complex<double>> g_hat(grid.spectral_size());
  RealFft(n, grid.dim()).forward(samples, g_hat);

  std::vector<std::size_t> lattice_of(window_size_);
  for (std::size_t w = 0; w < window_size_; ++w) {
    lattice_of[w] = grid.dim() == 1 ? axis_[w]
                                    : static_cast<std::size_t>(axis_[w / a]) * n + axis_[w % a];
  }

  spatial_.assign((steps + 1) * window_size_, 0.0);
  mass_.assign(steps + 1, 0.0);
  temporal_.resize(steps + 1);
  for (int k = 0; k <= steps; ++k) temporal_[k] = g.temporal(k * dt);

  const double inv = 1.0 / static_cast<double>(grid.size());
  std::exception_ptr failure;
#pragma omp parallel
  {
    RealFft fft(n, grid.dim());
    std::vector<std::complex<double>> spec(grid.spectral_size());
    std::vector<double> conv(grid.size());
#pragma omp for schedule(dynamic)
    for (int lag = 1; lag <= steps; ++lag) {
      try {
        const auto m = kernel_multiplier(kernel, grid, lag_time(lag));
        for (std::size_t s = 0; s < spec.size(); ++s) spec[s] = g_hat[s] * (m[s] * inv);
        fft.inverse(spec, conv);
        double* row = spatial_.data() + lag * window_size_;
        for (std::size_t w = 0; w < window_size_; ++w) row[w] = conv[lattice_of[w]];
        mass_[lag] = m[0];
      } catch (...) {
#pragma omp critical(stochlab_propagator_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::span<const double> PropagatorTable::spatial(int lag) const {
  return {spatial_.data() + lag * window_size_, window_size_};
}

double PropagatorTable::value(int i, int k, std::size_t w) const {
  if (k >= i) return 0.0;
  const int lag = i - k;
  return spatial_[lag * window_size_ + w] + temporal_[k] * mass_[lag];
}

// ---------------------------------------------------------------------------
// Ensemble accessors

std::size_t FieldEnsemble::window_size() const noexcept {
  return grid.dim() == 1 ? axis.size() : axis.size() * axis.size();
}

std::array<double, 2> FieldEnsemble::position(std::size_t w) const {
  const std::size_t a = axis.size();
  if (grid.dim() == 1) return {grid.coordinate(axis[w]), 0.0};
  return {grid.coordinate(axis[w % a]), grid.coordinate(axis[w / a])};
}

std::size_t FieldEnsemble::window_index(std::span<const double> x) const {
  require(static_cast<int>(x.size()) == grid.dim(), ErrorCode::DimensionMismatch,
          "point dimension differs from the grid");
  std::size_t slot[2] = {0, 0};
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double u = (x[c] + grid.half_width()) / grid.spacing();
    const long j = std::lround(u);
    require(std::abs(u - static_cast<double>(j)) <= 1e-9, ErrorCode::PairOffGrid,
            "x is not a lattice coordinate");
    const auto it = std::lower_bound(axis.begin(), axis.end(), static_cast<int>(j));
    require(it != axis.end() && *it == j, ErrorCode::PairOffGrid, "x is outside the window");
    slot[c] = static_cast<std::size_t>(it - axis.begin());
  }
  return grid.dim() == 1 ? slot[0] : slot[1] * axis.size() + slot[0];
}

int FieldEnsemble::time_index(double t) const {
  const double u = t / dt();
  const long i = std::lround(u);
  require(std::abs(u - static_cast<double>(i)) <= 1e-9 && i >= 0 && i <= steps(),
          ErrorCode::PairOffGrid, "t is not a lattice time");
  return static_cast<int>(i);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

/// u(t_i) = sum_{k<i} Phi_{i,k} D_k into out[(steps+1) x W].
void accumulate(const PropagatorTable& table, std::span<const double> drivers, double* out) {
  const std::size_t W = table.window_size();
  std::fill(out, out + W, 0.0);
  for (int i = 1; i <= table.steps(); ++i) {
    double* row = out + i * W;
    std::fill(row, row + W, 0.0);
    double uniform = 0.0;
    for (int k = 0; k < i; ++k) {
      const double d = drivers[k];
      if (d == 0.0) continue;
      const int lag = i - k;
      const double* s = table.spatial(lag).data();
      for (std::size_t w = 0; w < W; ++w) row[w] += s[w] * d;
      uniform += table.temporal(k) * table.mass(lag) * d;
    }
    if (uniform != 0.0)
      for (std::size_t w = 0; w < W; ++w) row[w] += uniform;
  }
}

double poisson_compensator_per_step(const NoiseSpec& noise, const TestFunctionSpec& g) {
  return noise.dt() * compensator_rate(*noise.jump, [&](double z) { return g.mark_factor(z); });
}

FieldEnsemble simulate(const KernelSpec& kernel, const SpectralGrid& grid,
                       const TestFunctionSpec& g, const NoiseSpec& noise, int realizations,
                       const WindowSpec& window, Execution execution) {
  noise.validate();
  g.validate();
  require(realizations >= 1, ErrorCode::InvalidArgument, "ensemble size must be >= 1");
  FieldEnsemble ens;
  ens.grid = grid;
  ens.kernel = kernel;
  ens.noise = noise;
  ens.g = g;
  ens.window = window;
  ens.realizations = realizations;

  const PropagatorTable table(kernel, grid, g, noise.steps, noise.dt(), window);
  ens.axis = table.axis_indices();
  ens.values.assign(static_cast<std::size_t>(realizations) * ens.slab(), 0.0);
  const double comp = noise.kind == NoiseKind::CompensatedPoisson
                          ? poisson_compensator_per_step(noise, g)
                          : 0.0;

  auto one = [&](int m) {
    const NoisePath path = sample_path(noise, static_cast<std::uint64_t>(m));
    const auto drivers = step_drivers(path, g, comp);
    accumulate(table, drivers, ens.values.data() + m * ens.slab());
  };
  if (execution == Execution::Serial) {
    for (int m = 0; m < realizations; ++m) one(m);
  } else {
#pragma omp parallel for schedule(static)
    for (int m = 0; m < realizations; ++m) one(m);
  }
  return ens;
}

}  // namespace

std::vector<double> step_drivers(const NoisePath& path, const TestFunctionSpec& g,
                                 double compensator_per_step) {
  if (path.kind == NoiseKind::Brownian) return path.increments;
  std::vector<double> d(path.steps, -compensator_per_step);
  const double dt = path.dt();
  for (const auto& e : path.events) {
    const auto k = static_cast<int>(std::floor(e.time / dt));
    if (k < path.steps) d[k] += g.mark_factor(e.mark);
  }
  return d;
}

double driver_variance(const NoiseSpec& noise, const TestFunctionSpec& g) {
  if (noise.kind == NoiseKind::Brownian) return noise.dt();
  return noise.dt() * compensator_rate(*noise.jump, [&](double z) {
           const double v = g.mark_factor(z);
           return v * v;
         });
}

FieldEnsemble convolve_brownian(const KernelSpec& kernel, const SpectralGrid& grid,
                                const TestFunctionSpec& g, const NoiseSpec& noise, int realizations,
                                const WindowSpec& window, Execution execution) {
  require(noise.kind == NoiseKind::Brownian, ErrorCode::InvalidArgument,
          "convolve_brownian needs Brownian noise");
  return simulate(kernel, grid, g, noise, realizations, window, execution);
}

FieldEnsemble convolve_poisson(const KernelSpec& kernel, const SpectralGrid& grid,
                               const TestFunctionSpec& g, const NoiseSpec& noise, int realizations,
                               const WindowSpec& window, Execution execution) {
  require(noise.kind == NoiseKind::CompensatedPoisson, ErrorCode::InvalidArgument,
          "convolve_poisson needs compensated Poisson noise");
  return simulate(kernel, grid, g, noise, realizations, window, execution);
}

double isometry_second_moment(const PropagatorTable& table, double driver_var, int i,
                              std::size_t wx, int j, std::size_t wy) {
  double sum = 0.0;
  for (int k = 0; k < std::max(i, j); ++k) {
    const double diff = table.value(i, k, wx) - table.value(j, k, wy);
    sum += diff * diff;
  }
  return sum * driver_var;
}

PropagatorTable propagators_for(const FieldEnsemble& e) {
  return PropagatorTable(e.kernel, e.grid, e.g, e.steps(), e.dt(), e.window);
}

// ---------------------------------------------------------------------------
// Persistence

void save_ensemble(const FieldEnsemble& e, const std::filesystem::path& prefix) {
  static_assert(std::endian::native == std::endian::little, "raw dump assumes little-endian");
  std::filesystem::path bin = prefix, meta = prefix;
  bin += ".bin";
  meta += ".json";
  std::ofstream out(bin, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + bin.string());
  out.write(reinterpret_cast<const char*>(e.values.data()),
            static_cast<std::streamsize>(e.values.size() * sizeof(double)));
  require(static_cast<bool>(out), ErrorCode::IoError, "short write to " + bin.string());

  Json j;
  j["format"] = "stochlab-ensemble";
  j["dtype"] = "float64-le";
  j["shape"] = {e.realizations, e.steps() + 1, e.window_size()};
  j["kernel"] = to_json(e.kernel);
  j["grid"] = to_json(e.grid);
  j["noise"] = to_json(e.noise);
  j["g"] = to_json(e.g);
  j["window"] = to_json(e.window);
  j["axis"] = e.axis;
  std::ofstream side(meta);
  require(static_cast<bool>(side), ErrorCode::IoError, "cannot write " + meta.string());
  side << j.dump(2) << '\n';
}

FieldEnsemble load_ensemble(const std::filesystem::path& prefix) {
  std::filesystem::path bin = prefix, meta = prefix;
  bin += ".bin";
  meta += ".json";
  std::ifstream side(meta);
  require(static_cast<bool>(side), ErrorCode::IoError, "cannot read " + meta.string());
  Json j;
  try {
    j = Json::parse(side);
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::IoError, meta.string() + ": " + ex.what());
  }
  check_keys(j, {"format", "dtype", "shape", "kernel", "grid", "noise", "g", "window", "axis"},
             "ensemble sidecar");
  require(j.value("format", "") == "stochlab-ensemble", ErrorCode::IoError,
          "not an ensemble sidecar");
  FieldEnsemble e;
  e.kernel = kernel_from_json(j.at("kernel"));
  e.grid = grid_from_json(j.at("grid"), e.kernel.dim);
  e.noise = noise_from_json(j.at("noise"));
  e.g = test_function_from_json(j.at("g"));
  e.window = window_from_json(j.at("window"));
  e.axis = j.at("axis").get<std::vector<int>>();
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  require(shape.size() == 3 && shape[1] == static_cast<std::size_t>(e.steps() + 1) &&
              shape[2] == e.window_size(),
          ErrorCode::IoError, "sidecar shape disagrees with its specs");
  e.realizations = static_cast<int>(shape[0]);
  e.values.resize(shape[0] * shape[1] * shape[2]);

  std::ifstream in(bin, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::IoError, "cannot read " + bin.string());
  in.read(reinterpret_cast<char*>(e.values.data()),
          static_cast<std::streamsize>(e.values.size() * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(e.values.size() * sizeof(double)),
          ErrorCode::IoError, bin.string() + " is shorter than its sidecar shape");
  return e;
}

void write_realization_csv(std::ostream& out, const FieldEnsemble& e, int m) {
  require(m >= 0 && m < e.realizations, ErrorCode::InvalidArgument, "realization out of range");
  out.precision(17);
  out << (e.grid.dim() == 1 ? "t,x,u\n" : "t,x1,x2,u\n");
  for (int i = 0; i <= e.steps(); ++i)
    for (std::size_t w = 0; w < e.window_size(); ++w) {
      const auto x = e.position(w);
      out << e.time(i) << ',' << x[0] << ',';
      if (e.grid.dim() == 2) out << x[1] << ',';
      out << e.at(m, i, w) << '\n';
    }
}

}  // namespace stochlab
