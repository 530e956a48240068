#pragma once

#include <cmath>
#include <numbers>

#include "stochlab/error.hpp"
#include "stochlab/kernels.hpp"

namespace testing {

/// Default grid when it exists; otherwise the largest box whose capped lattice still meets the
/// aliasing guard at t (heavy-tailed kernels at small t).
inline stochlab::SpectralGrid resolving_grid(const stochlab::KernelSpec& k, double t) {
  try {
    return stochlab::SpectralGrid::for_kernel(k, t, t);
  } catch (const stochlab::Error&) {
  }
  const int n = k.dim == 1 ? (1 << 22) : 4096;
  const double xi = std::pow(-std::log(stochlab::kAliasingThreshold) / t, 1.0 / k.alpha);
  return stochlab::SpectralGrid(0.99 * std::numbers::pi * n / (2.0 * xi), n, k.dim);
}

inline double lattice_integral(const std::vector<double>& v, const stochlab::SpectralGrid& g) {
  double s = 0.0;
  for (double x : v) s += x;
  return s * g.cell_volume();
}

}  // namespace testing
