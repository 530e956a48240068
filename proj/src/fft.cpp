#include "stochlab/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <utility>
#include <vector>

#include "stochlab/error.hpp"

namespace stochlab {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

RealFft::RealFft(int n, int dim) : n_(n), dim_(dim) {
  require(n >= 2 && n % 2 == 0, ErrorCode::InvalidArgument, "FFT size must be even and >= 2");
  require(dim == 1 || dim == 2, ErrorCode::InvalidArgument, "FFT dimension must be 1 or 2");
  std::vector<double> real(real_size());
  std::vector<std::complex<double>> spec(spectral_size());
  auto* r = real.data();
  auto* c = reinterpret_cast<fftw_complex*>(spec.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  if (dim == 1) {
    forward_plan_ = fftw_plan_dft_r2c_1d(n, r, c, flags);
    inverse_plan_ = fftw_plan_dft_c2r_1d(n, c, r, flags);
  } else {
    forward_plan_ = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
    inverse_plan_ = fftw_plan_dft_c2r_2d(n, n, c, r, flags);
  }
  require(forward_plan_ != nullptr && inverse_plan_ != nullptr, ErrorCode::InvalidArgument,
          "FFTW planning failed");
}

RealFft::~RealFft() { release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : n_(other.n_),
      dim_(other.dim_),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    release();
    n_ = other.n_;
    dim_ = other.dim_;
    forward_plan_ = std::exchange(other.forward_plan_, nullptr);
    inverse_plan_ = std::exchange(other.inverse_plan_, nullptr);
  }
  return *this;
}

void RealFft::release() noexcept {
  if (forward_plan_ == nullptr && inverse_plan_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  forward_plan_ = inverse_plan_ = nullptr;
}

std::size_t RealFft::real_size() const noexcept {
  return dim_ == 1 ? static_cast<std::size_t>(n_) : static_cast<std::size_t>(n_) * n_;
}

std::size_t RealFft::spectral_size() const noexcept {
  const std::size_t half = static_cast<std::size_t>(n_ / 2 + 1);
  return dim_ == 1 ? half : static_cast<std::size_t>(n_) * half;
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  require(in.size() == real_size() && out.size() == spectral_size(), ErrorCode::GridMismatch,
          "forward FFT buffer size mismatch");
  // r2c does not modify its input, FFTW just lacks the const.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
  require(in.size() == spectral_size() && out.size() == real_size(), ErrorCode::GridMismatch,
          "inverse FFT buffer size mismatch");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                       reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace stochlab
