#pragma once
// Reference computations for the tests. Nothing here calls into the library.

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle {

inline double gaussian(double t, double r2, int dim) {
  return std::pow(4.0 * std::numbers::pi * t, -0.5 * dim) * std::exp(-r2 / (4.0 * t));
}

inline double cauchy_1d(double t, double x) { return t / (std::numbers::pi * (t * t + x * x)); }

/// Cauchy kernel summed over images x + kP, via the Poisson kernel of the circle.
inline double cauchy_periodic(double t, double x, double period) {
  const double a = 2.0 * std::numbers::pi * t / period, b = 2.0 * std::numbers::pi * x / period;
  return std::sinh(a) / (period * (std::cosh(a) - std::cos(b)));
}

/// Gaussian summed over images in each coordinate (|k| <= 6 periods).
inline double gaussian_periodic(double t, const std::vector<double>& x, double period) {
  double v = 1.0;
  for (double xi : x) {
    double s = 0.0;
    for (int k = -6; k <= 6; ++k) s += gaussian(t, (xi + k * period) * (xi + k * period), 1);
    v *= s;
  }
  return v;
}

/// (1/pi) int_0^inf xi^eps cos(xi x) exp(-t xi^alpha) dxi, the d = 1 kernel by direct inversion.
inline double fourier_kernel_1d(double alpha, double eps, double t, double x) {
  auto f = [=](double xi) { return std::pow(xi, eps) * std::exp(-t * std::pow(xi, alpha)); };
  if (x == 0.0) {
    boost::math::quadrature::exp_sinh<double> q;
    return q.integrate(f, 0.0, INFINITY) / std::numbers::pi;
  }
  boost::math::quadrature::ooura_fourier_cos<double> q;
  return q.integrate(f, std::abs(x)).first / std::numbers::pi;
}

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Closed-form OLS of log y on log x.
inline Line ols_loglog(const std::vector<std::pair<double, double>>& data) {
  const double n = static_cast<double>(data.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : data) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  Line l;
  l.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  l.intercept = (sy - l.slope * sx) / n;
  return l;
}

/// int_a^b f(t) dt, adaptive Gauss-Kronrod.
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

/// lambda int_0^T int h(t,z)^2 (rate/2) e^{-rate|z|} dz dt, by nested quadrature.
inline double poisson_isometry(const std::function<double(double, double)>& h, double rate,
                               double lambda, double horizon) {
  boost::math::quadrature::exp_sinh<double> half_line;
  auto inner = [&](double t) {
    auto dens = [&](double z) { return 0.5 * rate * std::exp(-rate * z); };
    const double pos = half_line.integrate([&](double z) { return h(t, z) * h(t, z) * dens(z); },
                                           0.0, INFINITY);
    const double neg = half_line.integrate([&](double z) { return h(t, -z) * h(t, -z) * dens(z); },
                                           0.0, INFINITY);
    return pos + neg;
  };
  return lambda * integrate(inner, 0.0, horizon);
}

/// Pair average (1/|A|^2) int_A int_A |u(Y) - u(Z)|^p on an N x N midpoint grid of the box
/// [t0, t1] x [x0, x1] restricted to `inside`. Exact double sums over the grid for p = 1 and 2.
inline double grid_pair_average(const std::function<double(double, double)>& u,
                                const std::function<bool(double, double)>& inside, double t0,
                                double t1, double x0, double x1, int N, double p) {
  std::vector<double> v;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const double t = t0 + (i + 0.5) * (t1 - t0) / N;
      const double x = x0 + (j + 0.5) * (x1 - x0) / N;
      if (inside(t, x)) v.push_back(u(t, x));
    }
  const double n = static_cast<double>(v.size());
  if (p == 2.0) {
    double mean = 0.0;
    for (double a : v) mean += a / n;
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean) / n;
    return 2.0 * var;  // sum_{i,j} (a_i - a_j)^2 / n^2
  }
  // p = 1: sum_{i,j} |a_i - a_j| = 2 sum_k a_(k) (2k - n - 1) over the sorted values.
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * (2.0 * (k + 1) - n - 1.0);
  return 2.0 * s / (n * n);
}

}  // namespace oracle
