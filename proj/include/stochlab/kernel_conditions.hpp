#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stochlab/kernels.hpp"

namespace stochlab {

struct TimePair {
  double s = 0.0;
  double t = 0.0;
};

/// Inputs for the three kernel integral conditions and their p-power variants.
struct ConditionProbe {
  KernelSpec kernel;
  double beta = 0.0;    ///< weight (1 + |z|^beta); beta = 0 drops the weight
  double power = 2.0;   ///< q: 2 for the Brownian case, p for the Levy case
  double horizon = 1.0; ///< T
  std::vector<TimePair> time_pairs;
  /// Optional lattice for the spectral cross-check of the spatial integrals.
  std::optional<SpectralGrid> grid;
  int mesh_intervals = 64; ///< J, graded time mesh
  double grading = 3.0;    ///< kappa

  void validate() const;
};

struct QuadratureResult {
  double value = 0.0;
  double relative_change = 0.0; ///< two-level Richardson disagreement
  int intervals = 0;            ///< J of the accepted level
};

/// int_0^s ( int |p(t-r,z) - p(s-r,z)| (1+|z|^beta) dz )^q dr
double condition_increment(const ConditionProbe& probe, double s, double t);
QuadratureResult condition_increment_detailed(const ConditionProbe& probe, double s, double t);

/// int_0^s ( int |p(s-r,z)| dz )^q dr
double condition_mass(const ConditionProbe& probe, double s);
QuadratureResult condition_mass_detailed(const ConditionProbe& probe, double s);

/// int_s^t ( int |p(t-r,z)| (1+|z|^beta) dz )^q dr
double condition_tail(const ConditionProbe& probe, double s, double t);
QuadratureResult condition_tail_detailed(const ConditionProbe& probe, double s, double t);

/// Inner spatial integral of the increment condition at lag tau = s - r and step delta = t - s.
double increment_spatial_integral(const KernelSpec& kernel, double beta, double tau, double delta);
/// int |p(t,z)| (1 + |z|^beta) dz in free space (int |p(t,z)| dz for beta = 0).
double weighted_kernel_mass(const KernelSpec& kernel, double beta, double t);
/// Same spatial integrals from lattice samples (periodic box), for cross-checks.
double increment_spatial_integral_lattice(const KernelSpec& kernel, const SpectralGrid& grid,
                                          double beta, double tau, double delta);

struct PowerFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr = 0.0;
  std::size_t points = 0;
  double value_decades = 0.0; ///< log10(max value / min value)
  bool narrow_span = false;   ///< value_decades < 1.5
};

/// OLS of log(value) on log(scale). Requires >= 4 strictly positive pairs.
PowerFit fit_exponent(std::span<const std::pair<double, double>> pairs);

struct ConditionRow {
  TimePair pair;
  double increment = 0.0;
  double mass = 0.0;
  double tail = 0.0;
};

struct ConditionReport {
  ConditionProbe probe;
  std::vector<ConditionRow> rows;
  PowerFit gamma1; ///< increment LHS vs t - s, slope rescaled by 2/q
  PowerFit gamma2; ///< tail LHS vs t - s, slope rescaled by 2/q
  double n0_estimate = 0.0;
  /// (alpha - 2 eps)/alpha.
  double predicted_gamma = 0.0;
};

/// Evaluates all three conditions over probe.time_pairs (in parallel) and fits gamma1, gamma2.
ConditionReport audit_conditions(const ConditionProbe& probe);

/// Dyadic pairs (s, s + 2^-k) for k in [k_min, k_max].
std::vector<TimePair> dyadic_time_pairs(double s, int k_min, int k_max);

}  // namespace stochlab
