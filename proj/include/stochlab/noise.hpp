#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

namespace stochlab {

enum class NoiseKind { Brownian, CompensatedPoisson };

enum class MarkFamily {
  TwoSidedExponential,  ///< density (rate/2) exp(-rate |z|)
  TruncatedPower,       ///< Levy density scale |z|^{-1-index} on cutoff < |z| <= 1
};

/// Jump part of the noise: nu(dz) = intensity() * density(z) dz.
struct JumpSpec {
  MarkFamily family = MarkFamily::TwoSidedExponential;
  double rate = 1.0;       ///< two-sided exponential
  double lambda = 1.0;     ///< jump intensity for the two-sided exponential law
  double scale = 1.0;      ///< truncated power law
  double index = 0.5;      ///< truncated power law, in (0, 2)
  double cutoff = 1e-2;    ///< truncated power law small-jump truncation

  void validate() const;
  /// Total mass of nu (the event rate).
  double intensity() const;
  /// Normalized mark density.
  double density(double z) const;
  /// E|Z|^p under the normalized mark law.
  double absolute_moment(double p) const;
  /// int_{|z| <= cutoff} z^2 nu(dz) of the dropped small jumps (0 for finite activity).
  double truncated_variance() const;
  double sample_mark(std::mt19937_64& rng) const;
};

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Brownian;
  double horizon = 1.0;
  int steps = 100;
  std::optional<JumpSpec> jump;
  double p0 = 4.0;  ///< integrability order required of the marks
  std::uint64_t seed = 0;

  void validate() const;
  double dt() const noexcept { return horizon / steps; }
};

struct JumpEvent {
  double time = 0.0;
  double mark = 0.0;
};

struct NoisePath {
  NoiseKind kind = NoiseKind::Brownian;
  double horizon = 1.0;
  int steps = 0;
  std::vector<double> increments;  ///< Brownian dW per step
  std::vector<JumpEvent> events;   ///< Poisson events in increasing time
  std::optional<JumpSpec> jump;

  double dt() const noexcept { return horizon / steps; }
};

/// Deterministic in (spec.seed, stream); distinct streams are independent.
NoisePath sample_path(const NoiseSpec& spec, std::uint64_t stream);

using MarkTimeFunction = std::function<double(double t, double z)>;

/// int_0^T int h(t, z) nu(dz) dt by adaptive quadrature (1e-6 relative).
double compensator(const JumpSpec& jump, const MarkTimeFunction& h, double horizon);
/// int h(t, z) nu(dz) at a fixed time, same accuracy.
double compensator_rate(const JumpSpec& jump, const std::function<double(double)>& h);

/// sum_k h(tau_k, z_k) - compensator over [0, T].
double compensated_integral(const NoisePath& path, const MarkTimeFunction& h);

/// Left-point Ito sum sum_i h(t_i) dW_i over [0, T].
double ito_integral(const NoisePath& path, const std::function<double(double)>& h);

/// sup_{0 <= t <= T} |int_0^t int h dN~| sampled at every event (both sides) and step node.
double compensated_supremum(const NoisePath& path, const MarkTimeFunction& h);

/// Right side of the Kunita bound without N(p), for deterministic h:
/// (int int h^2 dnu dt)^{p/2} + int int |h|^p dnu dt.
double kunita_rhs(const JumpSpec& jump, const MarkTimeFunction& h, double horizon, double p);

/// "t,increment" rows (Brownian) or "time,mark" rows (Poisson).
void write_path_csv(std::ostream& out, const NoisePath& path);

}  // namespace stochlab
