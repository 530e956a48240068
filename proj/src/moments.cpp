#include "stochlab/moments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "stochlab/error.hpp"
#include "stochlab/rng.hpp"
#include "stochlab/serialization.hpp"

namespace stochlab {

namespace {

struct Slot {
  int time = 0;
  std::size_t window = 0;
};

Slot locate(const FieldEnsemble& e, const SpaceTimePoint& p) {
  return {e.time_index(p.t), e.window_index(p.x)};
}

SpaceTimePoint point_at(const FieldEnsemble& e, int i, std::size_t w) {
  const auto pos = e.position(w);
  SpaceTimePoint p{e.time(i), {pos[0]}};
  if (e.grid.dim() == 2) p.x.push_back(pos[1]);
  return p;
}

double window_step(const FieldEnsemble& e) {
  return e.axis.size() > 1 ? (e.axis[1] - e.axis[0]) * e.grid.spacing() : e.grid.spacing();
}

void moment_of_pair(const FieldEnsemble& e, const PointPair& pair, double p, double& mean,
                    double& se) {
  const Slot a = locate(e, pair.first);
  const Slot b = locate(e, pair.second);
  const int M = e.realizations;
  double sum = 0.0, sum2 = 0.0;
  for (int m = 0; m < M; ++m) {
    const double v = std::pow(std::abs(e.at(m, a.time, a.window) - e.at(m, b.time, b.window)), p);
    sum += v;
    sum2 += v * v;
  }
  mean = sum / M;
  const double var = std::max(0.0, (sum2 - M * mean * mean) / (M - 1));
  se = std::sqrt(var / M);
}

/// 0 spatial, 1 temporal, 2 mixed.
int pair_kind(const PointPair& pair) {
  if (pair.first.t == pair.second.t) return 0;
  if (pair.first.x == pair.second.x) return 1;
  return 2;
}

}  // namespace

MomentField estimate_pair_moments(const FieldEnsemble& ensemble, std::span<const PointPair> pairs,
                                  double p, Execution execution) {
  require(p >= 1.0, ErrorCode::InvalidArgument, "moment order must be >= 1");
  require(ensemble.realizations >= 30, ErrorCode::EnsembleTooSmall,
          "ensemble has " + std::to_string(ensemble.realizations) + " realizations, need >= 30");
  // Validate every pair up front so errors do not surface inside the parallel loop.
  for (const auto& pair : pairs) {
    locate(ensemble, pair.first);
    locate(ensemble, pair.second);
  }
  MomentField field;
  field.p = p;
  field.realizations = ensemble.realizations;
  field.pairs.assign(pairs.begin(), pairs.end());
  field.estimate.resize(pairs.size());
  field.stderr.resize(pairs.size());
  const auto n = static_cast<long>(pairs.size());
  if (execution == Execution::Serial) {
    for (long k = 0; k < n; ++k)
      moment_of_pair(ensemble, pairs[k], p, field.estimate[k], field.stderr[k]);
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (long k = 0; k < n; ++k)
      moment_of_pair(ensemble, pairs[k], p, field.estimate[k], field.stderr[k]);
  }
  return field;
}

double snapped_spatial_lag(const FieldEnsemble& e, double lag) {
  const double step = window_step(e);
  return std::max(1L, std::lround(lag / step)) * step;
}

double snapped_temporal_lag(const FieldEnsemble& e, double lag) {
  const long q = std::max(1L, std::lround(lag * lag / e.dt()));
  return std::sqrt(q * e.dt());
}

std::vector<PointPair> sample_pairs(const FieldEnsemble& e, const PairRequest& request) {
  require(request.count >= 1, ErrorCode::EmptyRequest, "pair count must be >= 1");
  const int dim = e.grid.dim();
  const int A = static_cast<int>(e.axis.size());
  const std::size_t W = e.window_size();
  auto rng = stream_rng(request.seed, 0);
  auto uniform_int = [&](int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  // Lattice points of each cylinder.
  struct Members {
    std::vector<int> times;
    std::vector<std::size_t> points;
  };
  std::vector<Members> members;
  for (const auto& cyl : request.cylinders) {
    require(cyl.dim() == dim, ErrorCode::DimensionMismatch, "cylinder dimension differs from grid");
    Members mem;
    const double c2 = cyl.radius * cyl.radius;
    for (int i = 0; i <= e.steps(); ++i)
      if (std::abs(e.time(i) - cyl.center.t) <= c2 * (1.0 + 1e-12)) mem.times.push_back(i);
    for (std::size_t w = 0; w < W; ++w) {
      const auto x = e.position(w);
      double r2 = 0.0;
      for (int c = 0; c < dim; ++c) r2 += (x[c] - cyl.center.x[c]) * (x[c] - cyl.center.x[c]);
      if (r2 <= c2 * (1.0 + 1e-12)) mem.points.push_back(w);
    }
    require(!mem.times.empty() && !mem.points.empty(), ErrorCode::EmptyCylinder,
            "cylinder contains no stored lattice point");
    members.push_back(std::move(mem));
  }

  std::vector<PointPair> pairs;
  if (request.rule == PairRule::WithinCylinder) {
    require(!members.empty(), ErrorCode::EmptyRequest, "within-cylinder rule needs cylinders");
    for (std::size_t c = 0; c < members.size(); ++c) {
      const auto& mem = members[c];
      const int nt = static_cast<int>(mem.times.size());
      const int nx = static_cast<int>(mem.points.size());
      for (int r = 0; r < request.count; ++r) {
        PointPair pair;
        pair.first = point_at(e, mem.times[uniform_int(0, nt - 1)], mem.points[uniform_int(0, nx - 1)]);
        pair.second = point_at(e, mem.times[uniform_int(0, nt - 1)], mem.points[uniform_int(0, nx - 1)]);
        pair.delta = parabolic_distance(pair.first, pair.second);
        pair.cylinder = static_cast<int>(c);
        pairs.push_back(std::move(pair));
      }
    }
    return pairs;
  }

  require(!request.lags.empty(), ErrorCode::EmptyRequest, "dyadic-lag rule needs lags");
  const double step = window_step(e);
  int round_robin = 0;
  for (double lag : request.lags) {
    require(lag > 0.0, ErrorCode::InvalidArgument, "lags must be positive");
    for (int r = 0; r < request.count; ++r) {
      const bool temporal = request.direction == LagDirection::Temporal ||
                            (request.direction == LagDirection::Alternate && r % 2 == 1);
      const long q = temporal ? std::max(1L, std::lround(lag * lag / e.dt()))
                              : std::max(1L, std::lround(lag / step));
      require(temporal ? q <= e.steps() - 1 : q <= A - 1, ErrorCode::InvalidArgument,
              "lag exceeds the stored lattice");
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        int i;
        std::size_t w;
        if (members.empty()) {
          i = uniform_int(1, e.steps());
          w = static_cast<std::size_t>(uniform_int(0, static_cast<int>(W) - 1));
        } else {
          const auto& mem = members[round_robin % members.size()];
          i = mem.times[uniform_int(0, static_cast<int>(mem.times.size()) - 1)];
          w = mem.points[uniform_int(0, static_cast<int>(mem.points.size()) - 1)];
        }
        const int sign = uniform_int(0, 1) == 0 ? 1 : -1;
        int i2 = i;
        std::size_t w2 = w;
        if (temporal) {
          i2 = i + sign * static_cast<int>(q);
          if (i2 < 1 || i2 > e.steps()) i2 = i - sign * static_cast<int>(q);
          if (i2 < 1 || i2 > e.steps()) continue;
        } else {
          const int a0 = static_cast<int>(w % A);
          int b0 = a0 + sign * static_cast<int>(q);
          if (b0 < 0 || b0 >= A) b0 = a0 - sign * static_cast<int>(q);
          if (b0 < 0 || b0 >= A) continue;
          w2 = w - a0 + b0;
        }
        PointPair pair;
        pair.first = point_at(e, i, w);
        pair.second = point_at(e, i2, w2);
        pair.delta = parabolic_distance(pair.first, pair.second);
        pair.requested_lag = lag;
        pairs.push_back(std::move(pair));
        placed = true;
      }
      require(placed, ErrorCode::EmptyCylinder, "no lattice pair realizes the requested lag");
      ++round_robin;
    }
  }
  return pairs;
}

PowerFit fit_moment_exponent(const MomentField& field, int kind) {
  std::vector<std::pair<double, double>> data;
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    if (field.pairs[k].delta <= 0.0) continue;
    if (kind >= 0 && pair_kind(field.pairs[k]) != kind) continue;
    data.emplace_back(field.pairs[k].delta, field.estimate[k]);
  }
  PowerFit fit = fit_exponent(data);
  fit.slope /= field.p;
  fit.stderr /= field.p;
  return fit;
}

PowerFit fit_moment_exponent(const MomentField& field) { return fit_moment_exponent(field, -1); }

std::vector<LagSummary> summarize_by_lag(const MomentField& field) {
  std::map<double, LagSummary> groups;
  std::map<double, double> variance;
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const double lag = field.pairs[k].requested_lag;
    auto& g = groups[lag];
    g.lag = lag;
    g.delta += field.pairs[k].delta;
    g.estimate += field.estimate[k];
    variance[lag] += field.stderr[k] * field.stderr[k];
    ++g.pairs;
  }
  std::vector<LagSummary> out;
  for (auto& [lag, g] : groups) {
    g.delta /= g.pairs;
    g.estimate /= g.pairs;
    g.stderr = std::sqrt(variance[lag]) / g.pairs;
    out.push_back(g);
  }
  return out;
}

void write_moment_csv(std::ostream& out, const MomentField& field) {
  const bool two = !field.pairs.empty() && field.pairs.front().first.x.size() == 2;
  out << (two ? "t,x1,x2,s,y1,y2,delta,estimate,stderr\n" : "t,x,s,y,delta,estimate,stderr\n");
  out.precision(17);
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const auto& pr = field.pairs[k];
    out << pr.first.t;
    for (double v : pr.first.x) out << ',' << v;
    out << ',' << pr.second.t;
    for (double v : pr.second.x) out << ',' << v;
    out << ',' << pr.delta << ',' << field.estimate[k] << ',' << field.stderr[k] << '\n';
  }
}

namespace {

Json point_json(const SpaceTimePoint& p) { return Json{{"t", p.t}, {"x", p.x}}; }

SpaceTimePoint point_from(const Json& j) {
  check_keys(j, {"t", "x"}, "point");
  return {j.at("t").get<double>(), j.at("x").get<std::vector<double>>()};
}

}  // namespace

void write_moment_json(std::ostream& out, const MomentField& field) {
  Json j;
  j["p"] = field.p;
  j["realizations"] = field.realizations;
  Json cylinders = Json::array();
  for (const auto& c : field.cylinders)
    cylinders.push_back({{"center", point_json(c.center)}, {"radius", c.radius}});
  j["cylinders"] = std::move(cylinders);
  Json rows = Json::array();
  for (std::size_t k = 0; k < field.pairs.size(); ++k) {
    const auto& pr = field.pairs[k];
    rows.push_back({{"X", point_json(pr.first)},
                    {"Y", point_json(pr.second)},
                    {"delta", pr.delta},
                    {"lag", pr.requested_lag},
                    {"cylinder", pr.cylinder},
                    {"estimate", field.estimate[k]},
                    {"stderr", field.stderr[k]}});
  }
  j["pairs"] = std::move(rows);
  out << j.dump(2) << '\n';
}

MomentField read_moment_json(std::istream& in) {
  MomentField field;
  try {
    const Json j = Json::parse(in);
    check_keys(j, {"p", "realizations", "cylinders", "pairs"}, "moment field");
    field.p = j.at("p").get<double>();
    field.realizations = j.at("realizations").get<int>();
    for (const auto& c : j.at("cylinders")) {
      check_keys(c, {"center", "radius"}, "cylinder");
      field.cylinders.push_back({point_from(c.at("center")), c.at("radius").get<double>()});
    }
    for (const auto& r : j.at("pairs")) {
      check_keys(r, {"X", "Y", "delta", "lag", "cylinder", "estimate", "stderr"}, "pair");
      PointPair pr;
      pr.first = point_from(r.at("X"));
      pr.second = point_from(r.at("Y"));
      pr.delta = r.at("delta").get<double>();
      pr.requested_lag = r.at("lag").get<double>();
      pr.cylinder = r.at("cylinder").get<int>();
      field.pairs.push_back(std::move(pr));
      field.estimate.push_back(r.at("estimate").get<double>());
      field.stderr.push_back(r.at("stderr").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, std::string("moment field: ") + e.what());
  }
  return field;
}

}  // namespace stochlab
