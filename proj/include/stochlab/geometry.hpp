#pragma once

#include <vector>

namespace stochlab {

struct SpaceTimePoint {
  double t = 0.0;
  std::vector<double> x;

  bool operator==(const SpaceTimePoint&) const = default;
};

/// max(|x - y|, |t - s|^{1/2}); DimensionMismatch on unequal spatial dimension.
double parabolic_distance(const SpaceTimePoint& a, const SpaceTimePoint& b);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int dim);

/// (t0 - c^2, t0 + c^2) x B_c(x0).
struct ParabolicCylinder {
  SpaceTimePoint center;
  double radius = 0.0;

  int dim() const noexcept { return static_cast<int>(center.x.size()); }
  /// 2 c^2 omega_d c^d.
  double measure() const;
  bool contains(const SpaceTimePoint& p) const;
};

}  // namespace stochlab
