#include "stochlab/kernels.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <tuple>

#include "stochlab/error.hpp"
#include "stochlab/fft.hpp"

namespace stochlab {

namespace {

constexpr double kPi = std::numbers::pi;

bool near_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

/// 1 / Gamma(x), zero at the poles.
double reciprocal_gamma(double x) {
  if (x <= 0.0 && near_integer(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

/// Coefficient of |x|^{-d-nu} in the inverse Fourier transform of |xi|^nu on R^d.
double riesz_coefficient(double nu, int dim) {
  return std::pow(2.0, nu) * std::pow(kPi, -0.5 * dim) * std::tgamma(0.5 * (dim + nu)) *
         reciprocal_gamma(-0.5 * nu);
}

/// Signed lattice index of FFT slot k.
int signed_index(int k, int n) { return k <= n / 2 ? k : k - n; }

struct SeriesValue {
  double sum = 0.0;
  double smallest_term = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------
// KernelSpec / SpectralGrid

void KernelSpec::validate() const {
  require(alpha > 0.0 && alpha <= 2.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 2]");
  require(epsilon >= 0.0, ErrorCode::InvalidArgument, "epsilon must be >= 0");
  require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "dimension must be 1 or 2");
  if (method == KernelMethod::ClosedForm) {
    require(closed_form_available(), ErrorCode::UnsupportedClosedForm,
            "closed form exists only for (alpha=2, eps=0) and (alpha=1, eps=0, d=1)");
  }
}

bool KernelSpec::closed_form_available() const noexcept {
  return epsilon == 0.0 && (alpha == 2.0 || (alpha == 1.0 && dim == 1));
}

SpectralGrid::SpectralGrid(double half_width, int points_per_axis, int dim)
    : half_width_(half_width), n_(points_per_axis), dim_(dim) {
  require(half_width > 0.0 && std::isfinite(half_width), ErrorCode::InvalidArgument,
          "grid half-width must be positive");
  require(points_per_axis >= 2 && points_per_axis % 2 == 0, ErrorCode::InvalidArgument,
          "points per axis must be even and >= 2");
  require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "grid dimension must be 1 or 2");
}

SpectralGrid SpectralGrid::for_kernel(const KernelSpec& spec, double t_min, double t_max) {
  spec.validate();
  require(t_min > 0.0, ErrorCode::NonPositiveTime, "minimum time must be positive");
  require(t_max >= t_min, ErrorCode::InvalidArgument, "t_max must be >= t_min");
  const double half_width = 8.0 * std::max(std::pow(t_max, 1.0 / spec.alpha), 1.0);
  const int cap = spec.dim == 1 ? (1 << 24) : (1 << 13);
  for (int n = 16; n <= cap; n *= 2) {
    SpectralGrid grid(half_width, n, spec.dim);
    if (grid.guard_holds(spec.alpha, t_min)) return grid;
  }
  fail(ErrorCode::AliasingViolation, "no grid within the size cap resolves t_min");
}

std::size_t SpectralGrid::size() const noexcept {
  return dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
}

std::size_t SpectralGrid::spectral_size() const noexcept {
  const auto half = static_cast<std::size_t>(n_ / 2 + 1);
  return dim_ == 1 ? half : static_cast<std::size_t>(n_) * half;
}

double SpectralGrid::cell_volume() const noexcept { return std::pow(spacing(), dim_); }

double SpectralGrid::frequency(int k) const noexcept {
  return kPi * signed_index(k, n_) / half_width_;
}

double SpectralGrid::max_frequency() const noexcept { return kPi * (n_ / 2) / half_width_; }

bool SpectralGrid::guard_holds(double alpha, double t) const noexcept {
  return std::exp(-t * std::pow(max_frequency(), alpha)) < kAliasingThreshold;
}

void SpectralGrid::require_guard(double alpha, double t) const {
  require(guard_holds(alpha, t), ErrorCode::AliasingViolation,
          "exp(-t xi_max^alpha) >= 1e-12 at t=" + std::to_string(t) +
              "; refine the grid or shrink the box");
}

// ---------------------------------------------------------------------------
// Lattice evaluation

namespace {

/// Calls f(slot, xi_vector) for every half-spectrum slot.
template <class F>
void for_each_mode(const SpectralGrid& grid, F&& f) {
  const int n = grid.points_per_axis();
  const int half = n / 2 + 1;
  if (grid.dim() == 1) {
    for (int k = 0; k < half; ++k) f(static_cast<std::size_t>(k), std::array<int, 2>{k, 0});
  } else {
    for (int k0 = 0; k0 < n; ++k0)
      for (int k1 = 0; k1 < half; ++k1)
        f(static_cast<std::size_t>(k0) * half + k1, std::array<int, 2>{k0, k1});
  }
}

double mode_norm(const SpectralGrid& grid, const std::array<int, 2>& k) {
  if (grid.dim() == 1) return std::abs(grid.frequency(k[0]));
  return std::hypot(grid.frequency(k[0]), grid.frequency(k[1]));
}

double multiplier_value(const KernelSpec& spec, double xi, double t) {
  const double decay = std::exp(-t * std::pow(xi, spec.alpha));
  if (spec.epsilon == 0.0) return decay;
  return xi == 0.0 ? 0.0 : std::pow(xi, spec.epsilon) * decay;
}

void check_time(double t) { require(t > 0.0, ErrorCode::NonPositiveTime, "t must be positive"); }

}  // namespace

std::vector<double> kernel_multiplier(const KernelSpec& spec, const SpectralGrid& grid,
                                      double t) {
  spec.validate();
  check_time(t);
  require(spec.dim == grid.dim(), ErrorCode::GridMismatch, "kernel and grid dimensions differ");
  grid.require_guard(spec.alpha, t);
  std::vector<double> m(grid.spectral_size());
  for_each_mode(grid, [&](std::size_t slot, const std::array<int, 2>& k) {
    m[slot] = multiplier_value(spec, mode_norm(grid, k), t);
  });
  return m;
}

double gaussian_density(double t, double radius, int dim) {
  return std::pow(4.0 * kPi * t, -0.5 * dim) * std::exp(-radius * radius / (4.0 * t));
}

double cauchy_density(double t, double radius, int dim) {
  if (dim == 1) return t / (kPi * (t * t + radius * radius));
  return t / (2.0 * kPi * std::pow(t * t + radius * radius, 1.5));
}

double periodic_gaussian(double t, std::span<const double> x, double half_width) {
  const double period = 2.0 * half_width;
  const int images = static_cast<int>(std::ceil(std::sqrt(4.0 * t * 760.0) / period)) + 1;
  double value = 1.0;
  for (double xi : x) {
    double axis = 0.0;
    for (int k = -images; k <= images; ++k) {
      const double y = xi + k * period;
      axis += std::exp(-y * y / (4.0 * t));
    }
    value *= axis / std::sqrt(4.0 * kPi * t);
  }
  return value;
}

double periodic_cauchy_1d(double t, double x, double half_width) {
  const double a = kPi * t / half_width;
  return std::sinh(a) / (2.0 * half_width * (std::cosh(a) - std::cos(kPi * x / half_width)));
}

double periodic_cauchy_1d_derivative(double t, double x, double half_width) {
  const double a = kPi * t / half_width;
  const double denom = std::cosh(a) - std::cos(kPi * x / half_width);
  return -std::sinh(a) * (kPi / half_width) * std::sin(kPi * x / half_width) /
         (2.0 * half_width * denom * denom);
}

namespace {

double periodic_gaussian_derivative_1d(double t, double x, double half_width) {
  const double period = 2.0 * half_width;
  const int images = static_cast<int>(std::ceil(std::sqrt(4.0 * t * 760.0) / period)) + 1;
  double sum = 0.0;
  for (int k = -images; k <= images; ++k) {
    const double y = x + k * period;
    sum += -y / (2.0 * t) * std::exp(-y * y / (4.0 * t));
  }
  return sum / std::sqrt(4.0 * kPi * t);
}

std::vector<double> closed_form_samples(const KernelSpec& spec, const SpectralGrid& grid,
                                        double t) {
  const int n = grid.points_per_axis();
  std::vector<double> out(grid.size());
  const double L = grid.half_width();
  if (grid.dim() == 1) {
    for (int j = 0; j < n; ++j) {
      const double x = grid.coordinate(j);
      out[j] = spec.alpha == 2.0 ? periodic_gaussian(t, std::span<const double>(&x, 1), L)
                                 : periodic_cauchy_1d(t, x, L);
    }
  } else {
    // Separable: product of the 1D periodized Gaussians.
    std::vector<double> axis(n);
    for (int j = 0; j < n; ++j) {
      const double x = grid.coordinate(j);
      axis[j] = periodic_gaussian(t, std::span<const double>(&x, 1), L);
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = axis[i] * axis[j];
  }
  return out;
}

/// (-1)^{k0+k1}: shifts the inverse DFT so that index 0 lands on x = -L.
double box_phase(const std::array<int, 2>& k, int dim) {
  const int parity = dim == 1 ? k[0] : k[0] + k[1];
  return (parity % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace

std::vector<double> eval_kernel(const KernelSpec& spec, const SpectralGrid& grid, double t) {
  spec.validate();
  check_time(t);
  require(spec.dim == grid.dim(), ErrorCode::GridMismatch, "kernel and grid dimensions differ");
  if (spec.method == KernelMethod::ClosedForm) return closed_form_samples(spec, grid, t);
  grid.require_guard(spec.alpha, t);

  const double norm = std::pow(2.0 * grid.half_width(), -grid.dim());
  std::vector<std::complex<double>> spectrum(grid.spectral_size());
  for_each_mode(grid, [&](std::size_t slot, const std::array<int, 2>& k) {
    spectrum[slot] = norm * box_phase(k, grid.dim()) * multiplier_value(spec, mode_norm(grid, k), t);
  });
  std::vector<double> out(grid.size());
  RealFft(grid.points_per_axis(), grid.dim()).inverse(spectrum, out);
  return out;
}

std::vector<std::vector<double>> eval_kernel_gradient(const KernelSpec& spec,
                                                      const SpectralGrid& grid, double t) {
  spec.validate();
  check_time(t);
  require(spec.dim == grid.dim(), ErrorCode::GridMismatch, "kernel and grid dimensions differ");
  const int n = grid.points_per_axis();
  std::vector<std::vector<double>> out(grid.dim(), std::vector<double>(grid.size()));

  if (spec.method == KernelMethod::ClosedForm) {
    const double L = grid.half_width();
    if (grid.dim() == 1) {
      for (int j = 0; j < n; ++j) {
        const double x = grid.coordinate(j);
        out[0][j] = spec.alpha == 2.0 ? periodic_gaussian_derivative_1d(t, x, L)
                                      : periodic_cauchy_1d_derivative(t, x, L);
      }
    } else {
      std::vector<double> value(n), slope(n);
      for (int j = 0; j < n; ++j) {
        const double x = grid.coordinate(j);
        value[j] = periodic_gaussian(t, std::span<const double>(&x, 1), L);
        slope[j] = periodic_gaussian_derivative_1d(t, x, L);
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const std::size_t idx = static_cast<std::size_t>(i) * n + j;
          out[0][idx] = slope[i] * value[j];
          out[1][idx] = value[i] * slope[j];
        }
    }
    return out;
  }

  grid.require_guard(spec.alpha, t);
  KernelSpec base = spec;
  base.epsilon = 0.0;
  const double norm = std::pow(2.0 * grid.half_width(), -grid.dim());
  RealFft fft(n, grid.dim());
  for (int axis = 0; axis < grid.dim(); ++axis) {
    std::vector<std::complex<double>> spectrum(grid.spectral_size());
    for_each_mode(grid, [&](std::size_t slot, const std::array<int, 2>& k) {
      // The Nyquist slot of an odd multiplier has no real representative.
      if (k[axis] == n / 2) return;
      const double xi = grid.frequency(k[axis]);
      spectrum[slot] = std::complex<double>(0.0, xi) * norm * box_phase(k, grid.dim()) *
                       multiplier_value(base, mode_norm(grid, k), t);
    });
    fft.inverse(spectrum, out[axis]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sharp bounds

double sharp_bound(const KernelSpec& spec, double t, double radius) {
  const double d = spec.dim;
  if (spec.epsilon == 0.0)
    return std::min(t / std::pow(radius, d + spec.alpha), std::pow(t, -d / spec.alpha));
  return radius * std::min(t / std::pow(radius, d + 2.0 + spec.alpha),
                           std::pow(t, -(d + 2.0) / spec.alpha));
}

BoundReport check_sharp_bounds(const KernelSpec& spec, const SpectralGrid& grid, double t,
                               double c_tolerance) {
  require(spec.epsilon == 0.0 || spec.epsilon == 1.0, ErrorCode::UnsupportedOrder,
          "pointwise bounds are stated for p and grad p only (epsilon in {0, 1})");
  require(spec.alpha < 2.0, ErrorCode::UnsupportedOrder,
          "the Gaussian has no polynomial tail branch");
  require(c_tolerance > 1.0, ErrorCode::InvalidArgument, "c_tolerance must exceed 1");

  KernelSpec base = spec;
  base.epsilon = 0.0;
  std::vector<double> magnitude;
  if (spec.epsilon == 0.0) {
    magnitude = eval_kernel(base, grid, t);
  } else {
    auto components = eval_kernel_gradient(base, grid, t);
    magnitude.assign(grid.size(), 0.0);
    for (const auto& c : components)
      for (std::size_t i = 0; i < c.size(); ++i) magnitude[i] += c[i] * c[i];
    for (double& v : magnitude) v = std::sqrt(v);
  }

  BoundReport report;
  report.c_tolerance = c_tolerance;
  report.min_ratio = std::numeric_limits<double>::infinity();
  report.max_ratio = 0.0;
  const int n = grid.points_per_axis();
  const double limit = 0.5 * grid.half_width();
  const int rows = grid.dim() == 1 ? 1 : n;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < n; ++j) {
      const double x0 = grid.coordinate(j);
      const double x1 = grid.dim() == 1 ? 0.0 : grid.coordinate(i);
      if (std::max(std::abs(x0), std::abs(x1)) > limit) continue;
      const double r = std::hypot(x0, x1);
      if (r == 0.0) continue;
      const double value = magnitude[static_cast<std::size_t>(i) * n + j];
      if (std::abs(value) < 1e-10) continue;
      const double ratio = value / sharp_bound(spec, t, r);
      report.min_ratio = std::min(report.min_ratio, ratio);
      report.max_ratio = std::max(report.max_ratio, ratio);
      ++report.points_checked;
    }
  }
  report.pass = report.points_checked > 0 && report.min_ratio >= 1.0 / c_tolerance &&
                report.max_ratio <= c_tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Radial profile

double unit_sphere_area(int dim) { return dim == 1 ? 2.0 : 2.0 * kPi; }

struct RadialProfile::Table {
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
};

namespace {

enum class ProfileKind { Gaussian, Cauchy, Numeric };

ProfileKind profile_kind(const KernelSpec& spec) {
  if (spec.epsilon == 0.0 && spec.alpha == 2.0) return ProfileKind::Gaussian;
  if (spec.epsilon == 0.0 && spec.alpha == 1.0) return ProfileKind::Cauchy;
  return ProfileKind::Numeric;
}

SeriesValue evaluate_series(std::span<const double> coeffs, const KernelSpec& spec, double rho) {
  SeriesValue v;
  double previous = std::numeric_limits<double>::infinity();
  v.smallest_term = std::numeric_limits<double>::infinity();
  double power = std::pow(rho, -spec.dim - spec.epsilon);
  const double ratio = std::pow(rho, -spec.alpha);
  for (std::size_t k = 0; k < coeffs.size(); ++k, power *= ratio) {
    if (coeffs[k] == 0.0) continue;
    const double term = coeffs[k] * power;
    const double size = std::abs(term);
    // Optimal truncation of a divergent expansion: stop once terms grow.
    if (size > previous && k > 2) break;
    v.sum += term;
    v.smallest_term = std::min(v.smallest_term, size);
    previous = size;
    if (size < 1e-18 * std::abs(v.sum)) break;
  }
  if (!std::isfinite(v.smallest_term)) v.smallest_term = 0.0;
  return v;
}

}  // namespace

double RadialProfile::quadrature(const KernelSpec& spec, double rho) {
  using Gauss = boost::math::quadrature::gauss<double, 20>;
  const double eps = spec.epsilon;
  const double alpha = spec.alpha;
  const int d = spec.dim;
  const double power = eps + d - 1.0;

  auto envelope = [&](double xi) {
    if (xi == 0.0) return power == 0.0 ? 1.0 : 0.0;
    return std::pow(xi, power) * std::exp(-std::pow(xi, alpha));
  };
  auto integrand = [&](double xi) {
    const double w = d == 1 ? std::cos(xi * rho) : std::cyl_bessel_j(0.0, xi * rho);
    return envelope(xi) * w;
  };

  // Cut-off where the envelope is below e^{-46} relative to O(1).
  double cut = 1.0;
  while (std::pow(cut, alpha) - power * std::log(cut) < 46.0) cut *= 1.25;

  const double width = std::min(2.0, kPi / std::max(rho, 1e-12));
  const double base = std::min(1.0, cut);
  double total = 0.0;
  // Geometric panels toward xi = 0 where xi^eps is not smooth.
  double lo = base * std::ldexp(1.0, -40);
  total += Gauss::integrate(integrand, 0.0, lo);
  while (lo < base) {
    const double hi = std::min(2.0 * lo, base);
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
    for (int p = 0; p < pieces; ++p)
      total += Gauss::integrate(integrand, lo + (hi - lo) * p / pieces,
                                lo + (hi - lo) * (p + 1) / pieces);
    lo = hi;
  }
  const int pieces = static_cast<int>(std::ceil((cut - base) / width));
  for (int p = 0; p < pieces; ++p) {
    const double a = base + (cut - base) * p / pieces;
    const double b = base + (cut - base) * (p + 1) / pieces;
    total += Gauss::integrate(integrand, a, b);
  }
  return d == 1 ? total / kPi : total / (2.0 * kPi);
}

RadialProfile::RadialProfile(const KernelSpec& spec) : spec_(spec) {
  spec_.method = KernelMethod::Spectral;
  spec_.validate();

  constexpr int kTerms = 64;
  tail_.resize(kTerms);
  double factorial = 1.0;
  for (int k = 0; k < kTerms; ++k) {
    if (k > 0) factorial *= k;
    const double nu = spec_.epsilon + spec_.alpha * k;
    tail_[k] = ((k % 2 == 0) ? 1.0 : -1.0) / factorial * riesz_coefficient(nu, spec_.dim);
    if (!std::isfinite(tail_[k])) {
      tail_.resize(k);
      break;
    }
  }

  switch (profile_kind(spec_)) {
    case ProfileKind::Gaussian:
      std::fill(tail_.begin(), tail_.end(), 0.0);
      switch_radius_ = 40.0;
      return;
    case ProfileKind::Cauchy:
      switch_radius_ = 4.0;
      return;
    case ProfileKind::Numeric:
      break;
  }

  const double candidates[] = {1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 24.0, 32.0};
  switch_radius_ = 32.0;
  for (double rho : candidates) {
    const SeriesValue s = evaluate_series(tail_, spec_, rho);
    if (s.sum == 0.0 || s.smallest_term > 1e-12 * std::abs(s.sum)) continue;
    const double direct = quadrature(spec_, rho);
    if (std::abs(direct - s.sum) <= 1e-9 * std::abs(direct) + 1e-15) {
      switch_radius_ = rho;
      break;
    }
  }

  const double step = std::min(0.01, switch_radius_ / 256.0);
  const auto nodes = static_cast<std::size_t>(std::ceil(switch_radius_ / step)) + 1;
  const double h = switch_radius_ / static_cast<double>(nodes - 1);
  std::vector<double> values(nodes);
  for (std::size_t i = 0; i < nodes; ++i) values[i] = quadrature(spec_, h * static_cast<double>(i));
  // Right end slope from the expansion; P is even so the left slope is zero.
  const double dr = 1e-4 * switch_radius_;
  const double right_slope = (asymptotic(switch_radius_ + dr) - asymptotic(switch_radius_ - dr)) /
                             (2.0 * dr);
  table_ = std::make_unique<Table>(Table{boost::math::interpolators::cardinal_cubic_b_spline<double>(
      values.data(), values.size(), 0.0, h, 0.0, right_slope)});
}

RadialProfile::~RadialProfile() = default;
RadialProfile::RadialProfile(RadialProfile&&) noexcept = default;
RadialProfile& RadialProfile::operator=(RadialProfile&&) noexcept = default;

std::shared_ptr<const RadialProfile> RadialProfile::cached(const KernelSpec& spec) {
  static std::mutex mutex;
  static std::map<std::tuple<double, double, int>, std::shared_ptr<const RadialProfile>> cache;
  const auto key = std::make_tuple(spec.alpha, spec.epsilon, spec.dim);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto profile = std::make_shared<const RadialProfile>(spec);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(profile)).first->second;
}

double RadialProfile::asymptotic(double rho) const {
  return evaluate_series(tail_, spec_, rho).sum;
}

double RadialProfile::unit(double rho) const {
  rho = std::abs(rho);
  switch (profile_kind(spec_)) {
    case ProfileKind::Gaussian:
      return gaussian_density(1.0, rho, spec_.dim);
    case ProfileKind::Cauchy:
      return cauchy_density(1.0, rho, spec_.dim);
    case ProfileKind::Numeric:
      break;
  }
  if (rho >= switch_radius_) return asymptotic(rho);
  return table_->spline(rho);
}

double RadialProfile::operator()(double t, double radius) const {
  const double scale = std::pow(t, 1.0 / spec_.alpha);
  return std::pow(t, -(spec_.dim + spec_.epsilon) / spec_.alpha) * unit(radius / scale);
}

void write_kernel_csv(std::ostream& out, const SpectralGrid& grid, std::span<const double> values) {
  require(values.size() == grid.size(), ErrorCode::GridMismatch, "value count != grid size");
  const int n = grid.points_per_axis();
  out.precision(17);
  if (grid.dim() == 1) {
    out << "x,value\n";
    for (int j = 0; j < n; ++j) out << grid.coordinate(j) << ',' << values[j] << '\n';
  } else {
    out << "x1,x2,value\n";
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out << grid.coordinate(i) << ',' << grid.coordinate(j) << ','
            << values[static_cast<std::size_t>(i) * n + j] << '\n';
  }
}

}  // namespace stochlab
