#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace stochlab {

enum class KernelMethod { ClosedForm, Spectral };

/// Kernel of the semigroup generated by -(-Laplacian)^{alpha/2}, optionally
/// differentiated by the radial Riesz multiplier |xi|^epsilon.
struct KernelSpec {
  double alpha = 2.0;
  double epsilon = 0.0;
  int dim = 1;
  KernelMethod method = KernelMethod::Spectral;

  /// Throws InvalidArgument on a bad order/dimension and UnsupportedClosedForm
  /// when method=ClosedForm is requested outside its validity set.
  void validate() const;
  bool closed_form_available() const noexcept;
  bool is_gaussian() const noexcept { return alpha == 2.0 && epsilon == 0.0; }
};

/// Periodic box [-L, L)^d sampled with n points per axis.
class SpectralGrid {
 public:
  SpectralGrid(double half_width, int points_per_axis, int dim);

  /// Default box for a kernel evaluated on [t_min, t_max]: L = 8 max(t_max^{1/alpha}, 1),
  /// n the smallest power of two that satisfies the aliasing guard at t_min.
  static SpectralGrid for_kernel(const KernelSpec& spec, double t_min, double t_max);

  double half_width() const noexcept { return half_width_; }
  int points_per_axis() const noexcept { return n_; }
  int dim() const noexcept { return dim_; }
  double spacing() const noexcept { return 2.0 * half_width_ / n_; }
  std::size_t size() const noexcept;
  std::size_t spectral_size() const noexcept;
  double cell_volume() const noexcept;

  /// x_j = -L + j h.
  double coordinate(int j) const noexcept { return -half_width_ + j * spacing(); }
  /// Angular frequency of FFT index k (signed wrap at n/2).
  double frequency(int k) const noexcept;
  /// Largest resolved angular frequency per axis, pi n / (2L).
  double max_frequency() const noexcept;

  bool guard_holds(double alpha, double t) const noexcept;
  /// Throws AliasingViolation unless exp(-t xi_max^alpha) < 1e-12.
  void require_guard(double alpha, double t) const;

  bool operator==(const SpectralGrid&) const = default;

 private:
  double half_width_;
  int n_;
  int dim_;
};

inline constexpr double kAliasingThreshold = 1e-12;

/// Fourier multiplier |xi|^eps exp(-t |xi|^alpha) in the half-spectrum layout
/// of RealFft. Multiplying a lattice DFT by it and inverting (with 1/n^d)
/// realizes the periodic spatial convolution with the kernel.
std::vector<double> kernel_multiplier(const KernelSpec& spec, const SpectralGrid& grid, double t);

/// Kernel samples p(t, x_j) on the lattice (row-major for dim 2).
std::vector<double> eval_kernel(const KernelSpec& spec, const SpectralGrid& grid, double t);

/// Components of grad p(t, .) on the lattice (epsilon is ignored).
std::vector<std::vector<double>> eval_kernel_gradient(const KernelSpec& spec,
                                                      const SpectralGrid& grid, double t);

// Free-space closed forms.
double gaussian_density(double t, double radius, int dim);
double cauchy_density(double t, double radius, int dim);
// Periodized (period 2L) closed forms, the exact objects the spectral route samples.
double periodic_gaussian(double t, std::span<const double> x, double half_width);
double periodic_cauchy_1d(double t, double x, double half_width);
double periodic_cauchy_1d_derivative(double t, double x, double half_width);

struct BoundReport {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t points_checked = 0;
  double c_tolerance = 0.0;
  bool pass = false;
};

/// Two-sided check of p(t,x) against min(t/|x|^{d+alpha}, t^{-d/alpha}) (epsilon=0)
/// or |grad p| against |x| min(t/|x|^{d+2+alpha}, t^{-(d+2)/alpha}) (epsilon=1),
/// over lattice points 0 < |x|_inf <= L/2 whose value exceeds 1e-10.
BoundReport check_sharp_bounds(const KernelSpec& spec, const SpectralGrid& grid, double t,
                               double c_tolerance);

/// Right-hand side of the sharp two-sided estimate at radius r.
double sharp_bound(const KernelSpec& spec, double t, double radius);

/// Free-space radial profile of the (Riesz-differentiated) kernel at unit time.
///
/// p_eps(t, z) = t^{-(d+eps)/alpha} P(|z| t^{-1/alpha}). P is exact for the
/// Gaussian and Cauchy cases; otherwise it is tabulated by Fourier (d=1) or
/// Hankel (d=2) quadrature on [0, rho_switch] and continued by the algebraic
/// expansion P(rho) ~ sum_k a_k rho^{-d-eps-alpha k} beyond.
class RadialProfile {
 public:
  explicit RadialProfile(const KernelSpec& spec);
  ~RadialProfile();
  RadialProfile(RadialProfile&&) noexcept;
  RadialProfile& operator=(RadialProfile&&) noexcept;

  /// Shared instance per (alpha, epsilon, dim); construction can cost ~1 s.
  static std::shared_ptr<const RadialProfile> cached(const KernelSpec& spec);

  const KernelSpec& spec() const noexcept { return spec_; }
  double unit(double rho) const;
  double operator()(double t, double radius) const;
  double switch_radius() const noexcept { return switch_radius_; }
  /// a_k of the large-radius expansion p(t, r) ~ sum_k a_k t^k r^{-d-eps-alpha k}.
  std::span<const double> tail_coefficients() const noexcept { return tail_; }
  /// Truncated expansion at unit time; used beyond switch_radius().
  double asymptotic(double rho) const;
  /// Direct quadrature of the inverse Fourier/Hankel transform (no table).
  static double quadrature(const KernelSpec& spec, double rho);

 private:
  struct Table;
  KernelSpec spec_;
  double switch_radius_ = 0.0;
  std::vector<double> tail_;
  std::unique_ptr<Table> table_;
};

/// Surface measure of the unit sphere in R^d (2 for d=1, 2 pi for d=2).
double unit_sphere_area(int dim);

/// Writes "x,value" (dim 1) or "x1,x2,value" (dim 2).
void write_kernel_csv(std::ostream& out, const SpectralGrid& grid, std::span<const double> values);

}  // namespace stochlab
