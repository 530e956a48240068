#include "stochlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stochlab/error.hpp"

namespace stochlab {

double parabolic_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
  require(a.x.size() == b.x.size(), ErrorCode::DimensionMismatch,
          "points have different spatial dimension");
  double r2 = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) r2 += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
  return std::max(std::sqrt(r2), std::sqrt(std::abs(a.t - b.t)));
}

double unit_ball_volume(int dim) {
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

double ParabolicCylinder::measure() const {
  return 2.0 * radius * radius * unit_ball_volume(dim()) * std::pow(radius, dim());
}

bool ParabolicCylinder::contains(const SpaceTimePoint& p) const {
  if (p.x.size() != center.x.size()) return false;
  if (std::abs(p.t - center.t) > radius * radius) return false;
  double r2 = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    r2 += (p.x[i] - center.x[i]) * (p.x[i] - center.x[i]);
  return r2 <= radius * radius;
}

}  // namespace stochlab
