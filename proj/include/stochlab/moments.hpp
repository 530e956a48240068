#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "stochlab/convolution.hpp"
#include "stochlab/geometry.hpp"
#include "stochlab/kernel_conditions.hpp"

namespace stochlab {

struct PointPair {
  SpaceTimePoint first;
  SpaceTimePoint second;
  double delta = 0.0;          ///< parabolic distance after lattice snapping
  double requested_lag = 0.0;  ///< dyadic-lag rule only
  int cylinder = -1;           ///< within-cylinder rule only
};

/// E|u(X) - u(Y)|^p per pair with Monte Carlo standard errors.
struct MomentField {
  double p = 2.0;
  int realizations = 0;
  std::vector<PointPair> pairs;
  std::vector<double> estimate;
  std::vector<double> stderr;
  std::vector<ParabolicCylinder> cylinders;  ///< carried over from the pair request
};

/// Parallel over pairs; Execution::Serial is the reference loop. Output order follows `pairs`.
MomentField estimate_pair_moments(const FieldEnsemble& ensemble, std::span<const PointPair> pairs,
                                  double p, Execution execution = Execution::Parallel);

enum class PairRule { WithinCylinder, DyadicLag };
enum class LagDirection { Alternate, Spatial, Temporal };

struct PairRequest {
  PairRule rule = PairRule::WithinCylinder;
  std::vector<ParabolicCylinder> cylinders;
  int count = 512;  ///< pairs per cylinder, or per lag
  std::vector<double> lags;
  LagDirection direction = LagDirection::Alternate;
  std::uint64_t seed = 0;
};

/// Lattice-snapped pairs on the ensemble's stored points.
std::vector<PointPair> sample_pairs(const FieldEnsemble& ensemble, const PairRequest& request);

/// Spatial lag: smallest positive multiple of the window step nearest to `lag`.
double snapped_spatial_lag(const FieldEnsemble& ensemble, double lag);
/// Temporal lag expressed as a parabolic distance: sqrt(q dt), q >= 1 nearest to lag^2 / dt.
double snapped_temporal_lag(const FieldEnsemble& ensemble, double lag);

/// OLS of log estimate on log delta over pairs with delta > 0; slope and stderr divided by p.
PowerFit fit_moment_exponent(const MomentField& field);
/// Same fit restricted to pairs with the given lag direction (0 spatial, 1 temporal), or all (-1).
PowerFit fit_moment_exponent(const MomentField& field, int kind);

/// Per distinct requested lag: mean delta, mean estimate, pooled stderr.
struct LagSummary {
  double lag = 0.0;
  double delta = 0.0;
  double estimate = 0.0;
  double stderr = 0.0;
  int pairs = 0;
};
std::vector<LagSummary> summarize_by_lag(const MomentField& field);

/// t,x,s,y,delta,estimate,stderr (x1,x2 / y1,y2 in 2D).
void write_moment_csv(std::ostream& out, const MomentField& field);
void write_moment_json(std::ostream& out, const MomentField& field);
/// Inverse of write_moment_json (pairs, cylinders and estimates).
MomentField read_moment_json(std::istream& in);

}  // namespace stochlab
