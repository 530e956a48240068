#include "stochlab/campanato.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "stochlab/error.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

// ---------------------------------------------------------------------------
// Boxes and domains

double Box::measure() const {
  double v = std::max(0.0, t_hi - t_lo);
  for (int i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
  return v;
}

bool Box::contains(const SpaceTimePoint& p) const {
  if (static_cast<int>(p.x.size()) != dim() || p.t < t_lo || p.t > t_hi) return false;
  for (int i = 0; i < dim(); ++i)
    if (p.x[i] < lo[i] || p.x[i] > hi[i]) return false;
  return true;
}

int DomainSpec::dim() const { return boxes.empty() ? 0 : boxes.front().dim(); }

void DomainSpec::validate() const {
  require(!boxes.empty() && boxes.size() <= 16, ErrorCode::InvalidArgument,
          "domain needs 1 to 16 boxes");
  for (const auto& b : boxes) {
    require(b.dim() == dim() && b.hi.size() == b.lo.size() && b.dim() >= 1 && b.dim() <= 2,
            ErrorCode::DimensionMismatch, "domain boxes must share a dimension of 1 or 2");
    require(b.measure() > 0.0, ErrorCode::InvalidArgument, "domain boxes need nonempty interior");
  }
}

bool DomainSpec::contains(const SpaceTimePoint& p) const {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(p); });
}

namespace {

/// Box intersection; measure() is zero when empty.
Box intersect(const Box& a, const Box& b) {
  Box r;
  r.t_lo = std::max(a.t_lo, b.t_lo);
  r.t_hi = std::min(a.t_hi, b.t_hi);
  r.lo.resize(a.dim());
  r.hi.resize(a.dim());
  for (int i = 0; i < a.dim(); ++i) {
    r.lo[i] = std::max(a.lo[i], b.lo[i]);
    r.hi[i] = std::min(a.hi[i], b.hi[i]);
  }
  return r;
}

/// Sum over nonempty subsets of (-1)^{|S|+1} f(intersection of S).
template <class F>
double inclusion_exclusion(const std::vector<Box>& boxes, F&& f) {
  const std::size_t n = boxes.size();
  double total = 0.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    Box acc;
    bool first = true;
    int members = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask & (1u << i))) continue;
      acc = first ? boxes[i] : intersect(acc, boxes[i]);
      first = false;
      ++members;
    }
    if (acc.measure() <= 0.0) continue;
    total += (members % 2 == 1 ? 1.0 : -1.0) * f(acc);
  }
  return total;
}

/// int_0^u sqrt(c^2 - x^2) dx for |u| <= c.
double half_chord_integral(double u, double c) {
  return 0.5 * (u * std::sqrt(std::max(0.0, c * c - u * u)) + c * c * std::asin(u / c));
}

/// Area of the disk of radius c at the origin inside {x <= a, y <= b}.
double disk_quadrant(double a, double b, double c) {
  const double top = std::min(a, c);
  if (top <= -c || b <= -c) return 0.0;
  auto chord = [&](double u0, double u1) {  // int 2 s(x) dx
    return u1 > u0 ? 2.0 * (half_chord_integral(u1, c) - half_chord_integral(u0, c)) : 0.0;
  };
  auto lower_plus_b = [&](double u0, double u1) {  // int (b + s(x)) dx
    return u1 > u0 ? b * (u1 - u0) + half_chord_integral(u1, c) - half_chord_integral(u0, c) : 0.0;
  };
  if (b >= c) return chord(-c, top);
  // |b| < c: inside |x| < w the line y = b cuts the chord.
  const double w = std::sqrt(c * c - b * b);
  const double lo = -c, mid_lo = -w, mid_hi = w;
  double area = lower_plus_b(std::max(mid_lo, lo), std::min(mid_hi, top));
  if (b >= 0.0) {
    area += chord(lo, std::min(mid_lo, top));
    area += chord(mid_hi, top);
  }
  return area;
}

double spatial_overlap(const Box& box, const ParabolicCylinder& q) {
  const double c = q.radius;
  if (box.dim() == 1) {
    const double lo = std::max(box.lo[0], q.center.x[0] - c);
    const double hi = std::min(box.hi[0], q.center.x[0] + c);
    return std::max(0.0, hi - lo);
  }
  return disk_rectangle_area(q.center.x[0], q.center.x[1], c, box.lo[0], box.hi[0], box.lo[1],
                             box.hi[1]);
}

double box_cylinder_measure(const Box& box, const ParabolicCylinder& q) {
  const double c2 = q.radius * q.radius;
  const double time = std::max(0.0, std::min(box.t_hi, q.center.t + c2) -
                                        std::max(box.t_lo, q.center.t - c2));
  return time == 0.0 ? 0.0 : time * spatial_overlap(box, q);
}

}  // namespace

double disk_rectangle_area(double cx, double cy, double c, double x0, double x1, double y0,
                           double y1) {
  if (x1 <= x0 || y1 <= y0) return 0.0;
  x0 -= cx, x1 -= cx, y0 -= cy, y1 -= cy;
  const double area = disk_quadrant(x1, y1, c) - disk_quadrant(x0, y1, c) -
                      disk_quadrant(x1, y0, c) + disk_quadrant(x0, y0, c);
  return std::max(0.0, area);
}

double DomainSpec::measure() const {
  return inclusion_exclusion(boxes, [](const Box& b) { return b.measure(); });
}

double DomainSpec::diameter() const {
  // delta is convex along segments in each argument, so the max sits on box corners.
  std::vector<SpaceTimePoint> corners;
  for (const auto& b : boxes) {
    const int d = b.dim();
    for (unsigned mask = 0; mask < (1u << (d + 1)); ++mask) {
      SpaceTimePoint p{(mask & 1u) ? b.t_hi : b.t_lo, std::vector<double>(d)};
      for (int i = 0; i < d; ++i) p.x[i] = (mask & (2u << i)) ? b.hi[i] : b.lo[i];
      corners.push_back(std::move(p));
    }
  }
  double diam = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i)
    for (std::size_t j = i + 1; j < corners.size(); ++j)
      diam = std::max(diam, parabolic_distance(corners[i], corners[j]));
  return diam;
}

double DomainSpec::intersection_measure(const ParabolicCylinder& q) const {
  require(q.dim() == dim(), ErrorCode::DimensionMismatch, "cylinder and domain dimensions differ");
  return inclusion_exclusion(boxes, [&](const Box& b) { return box_cylinder_measure(b, q); });
}

double a_type_constant(const DomainSpec& domain, const std::vector<SpaceTimePoint>& centers,
                       const std::vector<double>& radii) {
  domain.validate();
  require(!centers.empty() && !radii.empty(), ErrorCode::EmptyRequest,
          "need at least one center and one radius");
  const double diam = domain.diameter();
  double a = 1.0;
  for (double rho : radii) {
    require(rho > 0.0, ErrorCode::InvalidArgument, "radii must be positive");
    require(rho <= diam, ErrorCode::RadiusExceedsDiameter,
            "radius " + std::to_string(rho) + " exceeds diam D = " + std::to_string(diam));
    for (const auto& x : centers) {
      require(domain.contains(x), ErrorCode::InvalidArgument, "center lies outside the domain");
      const ParabolicCylinder q{x, rho};
      a = std::min(a, domain.intersection_measure(q) / q.measure());
    }
  }
  return std::min(a, 1.0);
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

SpaceTimePoint sample_in_domain(const DomainSpec& domain, std::mt19937_64& rng) {
  std::vector<double> weights;
  for (const auto& b : domain.boxes) weights.push_back(b.measure());
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const Box& b = domain.boxes[pick(rng)];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpaceTimePoint p{b.t_lo + (b.t_hi - b.t_lo) * u(rng), std::vector<double>(b.dim())};
  for (int i = 0; i < b.dim(); ++i) p.x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * u(rng);
  return p;
}

/// `count` uniform points of D cap Q by rejection from the cylinder's bounding box.
std::vector<SpaceTimePoint> sample_in_cylinder(const DomainSpec& domain, const ParabolicCylinder& q,
                                               int count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<SpaceTimePoint> pts;
  pts.reserve(count);
  const double c = q.radius;
  const long max_tries = 4000L * count;
  for (long tries = 0; static_cast<int>(pts.size()) < count && tries < max_tries; ++tries) {
    SpaceTimePoint p{q.center.t + c * c * u(rng), q.center.x};
    for (double& v : p.x) v += c * u(rng);
    if (q.contains(p) && domain.contains(p)) pts.push_back(std::move(p));
  }
  require(static_cast<int>(pts.size()) == count, ErrorCode::EmptyCylinder,
          "rejection sampling found too few points in D cap Q");
  return pts;
}

std::vector<SpaceTimePoint> centers_for(const DomainSpec& domain, const SeminormOptions& o) {
  if (!o.explicit_centers.empty()) return o.explicit_centers;
  auto rng = stream_rng(o.seed, 0xC0FFEEu);
  std::vector<SpaceTimePoint> centers;
  for (int i = 0; i < o.centers; ++i) centers.push_back(sample_in_domain(domain, rng));
  return centers;
}

void check_options(const DomainSpec& domain, const SeminormOptions& o) {
  domain.validate();
  require(o.budget >= 64, ErrorCode::SamplingBudgetTooSmall,
          "sampling budget " + std::to_string(o.budget) + " < 64 points per cylinder");
  require(!o.radii.empty(), ErrorCode::EmptyRequest, "no radii requested");
  require(!o.explicit_centers.empty() || o.centers >= 1, ErrorCode::EmptyRequest,
          "no centers requested");
  for (double r : o.radii) require(r > 0.0, ErrorCode::InvalidArgument, "radii must be positive");
}

struct CylinderStats {
  double measure = 0.0;
  double value = 0.0;
  double mean_deviation = 0.0;
  double pair_average = 0.0;
  bool dominates = true;
};

/// Runs `per_cylinder` for every (radius, center) and reduces per radius.
template <class F>
std::vector<ScaleRow> scan_scales(const DomainSpec& domain, const SeminormOptions& o,
                                  F&& per_cylinder) {
  const auto centers = centers_for(domain, o);
  const std::size_t nc = centers.size();
  const std::size_t nr = o.radii.size();
  std::vector<CylinderStats> stats(nr * nc);
  const auto jobs = static_cast<long>(nr * nc);
  auto job = [&](long k) {
    const std::size_t r = static_cast<std::size_t>(k) / nc, c = static_cast<std::size_t>(k) % nc;
    auto rng = stream_rng(o.seed, static_cast<std::uint64_t>(k) + 1);
    const ParabolicCylinder q{centers[c], o.radii[r]};
    const auto pts = sample_in_cylinder(domain, q, o.budget, rng);
    stats[k] = per_cylinder(pts, domain.intersection_measure(q), q);
  };
  if (o.execution == Execution::Serial) {
    for (long k = 0; k < jobs; ++k) job(k);
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (long k = 0; k < jobs; ++k) {
      try {
        job(k);
      } catch (...) {
#pragma omp critical(stochlab_seminorm_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<ScaleRow> rows(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    ScaleRow& row = rows[r];
    row.radius = o.radii[r];
    row.centers = static_cast<int>(nc);
    double mean = 0.0, sum2 = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& s = stats[r * nc + c];
      row.measure += s.measure / nc;
      row.value = std::max(row.value, s.value);
      row.mean_deviation = std::max(row.mean_deviation, s.mean_deviation);
      row.pair_average = std::max(row.pair_average, s.pair_average);
      mean += s.pair_average / nc;
      sum2 += s.pair_average * s.pair_average;
      row.pairwise_dominates = row.pairwise_dominates && s.dominates;
    }
    const double var = nc > 1 ? std::max(0.0, (sum2 - nc * mean * mean) /
                                                  (nc - 1.0))
                              : 0.0;
    row.stderr = std::sqrt(var / nc);
  }
  return rows;
}

void finish(SeminormReport& report, bool against_measure) {
  report.sup = 0.0;
  std::vector<std::pair<double, double>> data;
  for (const auto& row : report.rows) {
    report.sup = std::max(report.sup, row.value);
    report.pairwise_dominates = report.pairwise_dominates && row.pairwise_dominates;
    if (row.pair_average > 0.0)
      data.emplace_back(against_measure ? row.measure : row.radius, row.pair_average);
  }
  if (data.size() >= 4) {
    report.fit = fit_exponent(data);
    report.fitted = true;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Seminorms

SeminormReport campanato_seminorm(const SpaceTimeField& field, const DomainSpec& domain, double p,
                                  double theta, const SeminormOptions& options) {
  require(p >= 1.0 && theta >= 0.0, ErrorCode::InvalidArgument, "need p >= 1 and theta >= 0");
  check_options(domain, options);
  SeminormReport report;
  report.kind = "campanato";
  report.p = p;
  report.theta = theta;
  report.rows = scan_scales(domain, options, [&](const std::vector<SpaceTimePoint>& pts,
                                                 double measure, const ParabolicCylinder&) {
    const std::size_t n = pts.size();
    std::vector<double> u(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += (u[i] = field(pts[i]));
    mean /= n;
    double deviation = 0.0, pairwise = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      deviation += std::pow(std::abs(u[i] - mean), p);
      for (std::size_t j = 0; j < n; ++j) pairwise += std::pow(std::abs(u[i] - u[j]), p);
    }
    deviation /= n;
    pairwise /= static_cast<double>(n) * n;
    const double scale = std::pow(measure, 1.0 - theta);
    CylinderStats s;
    s.measure = measure;
    s.value = scale * pairwise;
    s.mean_deviation = scale * deviation;
    s.pair_average = pairwise;
    // Jensen on the empirical measure, up to rounding.
    s.dominates = pairwise >= deviation * (1.0 - 1e-12);
    return s;
  });
  finish(report, true);
  if (report.fitted) report.fitted_exponent = 1.0 + report.fit.slope;
  return report;
}

SeminormReport campanato_seminorm(const MomentField& field, double theta) {
  require(!field.cylinders.empty(), ErrorCode::EmptyRequest,
          "moment field carries no cylinders (use the within-cylinder pair rule)");
  const std::size_t nc = field.cylinders.size();
  std::vector<double> sum(nc, 0.0), var(nc, 0.0);
  std::vector<int> count(nc, 0);
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const int c = field.pairs[k].cylinder;
    if (c < 0 || c >= static_cast<int>(nc)) continue;
    sum[c] += field.estimate[k];
    var[c] += field.stderr[k] * field.stderr[k];
    ++count[c];
  }
  SeminormReport report;
  report.kind = "campanato";
  report.p = field.p;
  report.theta = theta;
  std::map<double, std::vector<std::size_t>> by_radius;
  for (std::size_t c = 0; c < nc; ++c)
    if (count[c] > 0) by_radius[field.cylinders[c].radius].push_back(c);
  for (const auto& [radius, members] : by_radius) {
    ScaleRow row;
    row.radius = radius;
    row.centers = static_cast<int>(members.size());
    double pooled = 0.0;
    for (std::size_t c : members) {
      const double measure = field.cylinders[c].measure();
      const double average = sum[c] / count[c];
      row.measure += measure / members.size();
      row.value = std::max(row.value, std::pow(measure, 1.0 - theta) * average);
      row.pair_average = std::max(row.pair_average, average);
      pooled += var[c] / (static_cast<double>(count[c]) * count[c]);
    }
    row.mean_deviation = std::numeric_limits<double>::quiet_NaN();
    row.stderr = std::sqrt(pooled) / members.size();
    report.rows.push_back(row);
  }
  finish(report, true);
  if (report.fitted) report.fitted_exponent = 1.0 + report.fit.slope;
  return report;
}

SeminormReport holder_seminorm(const SpaceTimeField& field, const DomainSpec& domain, double alpha,
                               const SeminormOptions& options) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "Holder order must be positive");
  check_options(domain, options);
  SeminormReport report;
  report.kind = "holder";
  report.alpha = alpha;
  if (alpha > 1.0) report.warning = "alpha > 1: only constants have a finite seminorm";
  report.rows = scan_scales(domain, options, [&](const std::vector<SpaceTimePoint>& pts,
                                                 double measure, const ParabolicCylinder&) {
    const std::size_t n = pts.size();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = field(pts[i]);
    CylinderStats s;
    s.measure = measure;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double diff = std::abs(u[i] - u[j]);
        s.pair_average = std::max(s.pair_average, diff);
        const double d = parabolic_distance(pts[i], pts[j]);
        if (d > 0.0) s.value = std::max(s.value, diff / std::pow(d, alpha));
      }
    return s;
  });
  finish(report, false);
  if (report.fitted) report.fitted_exponent = report.fit.slope;
  return report;
}

SeminormReport holder_seminorm(const MomentField& field, double alpha) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "Holder order must be positive");
  SeminormReport report;
  report.kind = "holder";
  report.alpha = alpha;
  report.p = field.p;
  std::map<double, ScaleRow> by_lag;
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const double d = field.pairs[k].delta;
    if (d <= 0.0) continue;
    const double norm = std::pow(field.estimate[k], 1.0 / field.p);
    auto& row = by_lag[field.pairs[k].requested_lag > 0.0 ? field.pairs[k].requested_lag : d];
    row.radius = field.pairs[k].requested_lag > 0.0 ? field.pairs[k].requested_lag : d;
    row.value = std::max(row.value, norm / std::pow(d, alpha));
    row.pair_average = std::max(row.pair_average, norm);
    ++row.centers;
  }
  for (auto& [lag, row] : by_lag) {
    report.sup = std::max(report.sup, row.value);
    report.rows.push_back(row);
  }
  if (field.pairs.size() >= 4) {
    report.fit = fit_moment_exponent(field);
    report.fitted = true;
    report.fitted_exponent = report.fit.slope;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Exponents

double embedding_exponent(double p, double theta, int dim) {
  require(p >= 1.0, ErrorCode::InvalidArgument, "p must be >= 1");
  require(dim >= 1, ErrorCode::InvalidArgument, "dimension must be positive");
  const double upper = 1.0 + p / (dim + 2.0);
  require(theta > 1.0 && theta <= upper * (1.0 + 1e-14), ErrorCode::ThetaOutOfEmbeddingRange,
          "theta = " + std::to_string(theta) + " outside (1, " + std::to_string(upper) + "]");
  return (dim + 2.0) * (theta - 1.0) / p;
}

double campanato_order(double p, double gamma, int dim) { return 1.0 + gamma * p / (dim + 2.0); }

bool inclusion_holds(double p, double theta, double q, double sigma) {
  return p <= q && (theta - p) / p <= (sigma - p) / q;
}

void write_seminorm_csv(std::ostream& out, const SeminormReport& report) {
  out.precision(17);
  out << "scale,measure,value,mean_deviation,pair_average,stderr\n";
  for (const auto& r : report.rows)
    out << r.radius << ',' << r.measure << ',' << r.value << ',' << r.mean_deviation << ','
        << r.pair_average << ',' << r.stderr << '\n';
}

}  // namespace stochlab
