#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "stochlab/convolution.hpp"
#include "stochlab/geometry.hpp"
#include "stochlab/kernel_conditions.hpp"
#include "stochlab/moments.hpp"

namespace stochlab {

/// Axis-aligned space-time box [t_lo, t_hi] x prod [lo_i, hi_i].
struct Box {
  double t_lo = 0.0;
  double t_hi = 1.0;
  std::vector<double> lo;
  std::vector<double> hi;

  int dim() const noexcept { return static_cast<int>(lo.size()); }
  double measure() const;
  bool contains(const SpaceTimePoint& p) const;
};

/// Finite union of boxes.
struct DomainSpec {
  std::vector<Box> boxes;

  int dim() const;
  void validate() const;
  bool contains(const SpaceTimePoint& p) const;
  double measure() const;
  /// Diameter in the parabolic metric.
  double diameter() const;
  /// |D cap Q| in closed form (inclusion-exclusion over the boxes).
  double intersection_measure(const ParabolicCylinder& q) const;
};

/// Area of the disk of radius c centered at (cx, cy) inside [x0, x1] x [y0, y1].
double disk_rectangle_area(double cx, double cy, double c, double x0, double x1, double y0,
                           double y1);

/// min over samples of |D cap Q_rho(X)| / |Q_rho(X)|, a lower estimate of the A-type constant.
double a_type_constant(const DomainSpec& domain, const std::vector<SpaceTimePoint>& centers,
                       const std::vector<double>& radii);

using SpaceTimeField = std::function<double(const SpaceTimePoint&)>;

struct SeminormOptions {
  std::vector<double> radii;
  int centers = 16;                             ///< sampled centers per radius
  int budget = 256;                             ///< points per cylinder
  std::vector<SpaceTimePoint> explicit_centers; ///< replaces sampled centers when non-empty
  std::uint64_t seed = 0;
  Execution execution = Execution::Parallel;
};

struct ScaleRow {
  double radius = 0.0;
  double measure = 0.0;         ///< mean |D cap Q| over the centers
  double value = 0.0;           ///< sup over centers of the normalized form
  double mean_deviation = 0.0;  ///< sup over centers of the mean-deviation form (Campanato)
  double pair_average = 0.0;    ///< max over centers of the raw pair average (or oscillation)
  double stderr = 0.0;          ///< standard error of the per-center averages
  int centers = 0;
  bool pairwise_dominates = true;
};

struct SeminormReport {
  std::string kind;  ///< "campanato" or "holder"
  double p = 0.0;
  double theta = 0.0;
  double alpha = 0.0;
  std::vector<ScaleRow> rows;
  double sup = 0.0;
  bool fitted = false;
  PowerFit fit;                 ///< log pair_average vs log measure (Campanato) or log radius
  double fitted_exponent = 0.0; ///< theta_hat (Campanato) or gamma_hat (Holder)
  bool pairwise_dominates = true;
  std::string warning;
};

/// Both forms per sampled (center, radius) for a deterministic field; the pairwise form
/// normalized by |D(X,rho)|^{1+theta}, the mean-deviation form by |D(X,rho)|^theta.
SeminormReport campanato_seminorm(const SpaceTimeField& field, const DomainSpec& domain, double p,
                                  double theta, const SeminormOptions& options);
/// Stochastic pairwise form from pair moments grouped by their cylinder.
SeminormReport campanato_seminorm(const MomentField& field, double theta);

/// max |u(X) - u(Y)| / delta^alpha over sampled pairs per radius.
SeminormReport holder_seminorm(const SpaceTimeField& field, const DomainSpec& domain, double alpha,
                               const SeminormOptions& options);
/// max (E|u(X) - u(Y)|^p)^{1/p} / delta^alpha over the pairs; gamma_hat from the moment fit.
SeminormReport holder_seminorm(const MomentField& field, double alpha);

/// (d + 2)(theta - 1)/p; ThetaOutOfEmbeddingRange unless 1 < theta <= 1 + p/(d + 2).
double embedding_exponent(double p, double theta, int dim);
/// theta = 1 + gamma p/(d + 2).
double campanato_order(double p, double gamma, int dim);

/// p <= q and (theta - p)/p <= (sigma - p)/q.
bool inclusion_holds(double p, double theta, double q, double sigma);

void write_seminorm_csv(std::ostream& out, const SeminormReport& report);

}  // namespace stochlab
