#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace stochlab {

/// Real-to-complex DFT on an n^dim periodic lattice (dim 1 or 2), backed by FFTW.
///
/// Layout follows FFTW: real data row-major n^dim, half spectrum with the last
/// axis truncated to n/2+1. Transforms are unnormalized. Plans are created once
/// under a global lock; execution is thread-safe and accepts any buffers of the
/// right size.
class RealFft {
 public:
  RealFft(int n, int dim);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  int n() const noexcept { return n_; }
  int dim() const noexcept { return dim_; }
  std::size_t real_size() const noexcept;
  std::size_t spectral_size() const noexcept;

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  /// Inverse transform; `in` is copied before FFTW overwrites it.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  void release() noexcept;

  int n_ = 0;
  int dim_ = 0;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace stochlab
