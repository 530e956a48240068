#include "stochlab/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "stochlab/error.hpp"

namespace stochlab {

namespace {

constexpr std::array<std::pair<const char*, Preset>, 5> kPresets{
    {{"kernel-audit", Preset::KernelAudit},
     {"brownian-regularity", Preset::BrownianRegularity},
     {"poisson-regularity", Preset::PoissonRegularity},
     {"fractional-sweep", Preset::FractionalSweep},
     {"embedding-check", Preset::EmbeddingCheck}}};

constexpr std::array<std::pair<const char*, LagDirection>, 3> kDirections{
    {{"alternate", LagDirection::Alternate},
     {"spatial", LagDirection::Spatial},
     {"temporal", LagDirection::Temporal}}};

bool regularity(Preset p) {
  return p == Preset::BrownianRegularity || p == Preset::PoissonRegularity;
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
  }
}

Json point_json(const SpaceTimePoint& p) { return Json{{"t", p.t}, {"x", p.x}}; }

SpaceTimePoint point_from(const Json& j, const std::string& where) {
  check_keys(j, {"t", "x"}, where);
  require(j.contains("t") && j.contains("x"), ErrorCode::ConfigError, where + " needs t and x");
  SpaceTimePoint p;
  read(j, "t", p.t, where);
  read(j, "x", p.x, where);
  return p;
}

std::vector<SpaceTimePoint> points_from(const Json& j, const std::string& where) {
  require(j.is_array(), ErrorCode::ConfigError, where + " must be an array");
  std::vector<SpaceTimePoint> out;
  for (const auto& item : j) out.push_back(point_from(item, where));
  return out;
}

Json points_json(const std::vector<SpaceTimePoint>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back(point_json(p));
  return a;
}

Json domain_json(const DomainSpec& d) {
  Json boxes = Json::array();
  for (const auto& b : d.boxes) {
    Json x = Json::array();
    for (int i = 0; i < b.dim(); ++i) x.push_back({b.lo[i], b.hi[i]});
    boxes.push_back({{"t", {b.t_lo, b.t_hi}}, {"x", x}});
  }
  return Json{{"boxes", boxes}};
}

DomainSpec domain_from(const Json& j) {
  check_keys(j, {"boxes"}, "embedding.domain");
  DomainSpec d;
  require(j.contains("boxes") && j.at("boxes").is_array(), ErrorCode::ConfigError,
          "embedding.domain needs a boxes array");
  for (const auto& item : j.at("boxes")) {
    check_keys(item, {"t", "x"}, "box");
    Box b;
    std::array<double, 2> t{0.0, 0.0};
    std::vector<std::array<double, 2>> x;
    read(item, "t", t, "box");
    read(item, "x", x, "box");
    b.t_lo = t[0];
    b.t_hi = t[1];
    for (const auto& [lo, hi] : x) {
      b.lo.push_back(lo);
      b.hi.push_back(hi);
    }
    d.boxes.push_back(std::move(b));
  }
  return d;
}

DomainSpec default_domain(int dim) {
  Box b;
  b.t_lo = 0.0;
  b.t_hi = 1.0;
  b.lo.assign(dim, -1.0);
  b.hi.assign(dim, 1.0);
  return DomainSpec{{b}};
}

/// Stage timer and error tagging.
class Stages {
 public:
  explicit Stages(ExperimentReport& report) : report_(report) {}

  template <class F>
  auto run(const std::string& name, F&& f) {
    current_ = name;
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(name, start);
    } else {
      auto result = f();
      record(name, start);
      return result;
    }
  }
  const std::string& current() const { return current_; }

 private:
  void record(const std::string& name, std::chrono::steady_clock::time_point start) {
    report_.timing["stages"][name] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  ExperimentReport& report_;
  std::string current_ = "config";
};

void add_verdict(ExperimentReport& r, std::string claim, double predicted, double fitted,
                 double tolerance) {
  const bool pass = std::isfinite(fitted) && std::abs(fitted - predicted) <= tolerance;
  r.verdicts.push_back({std::move(claim), predicted, fitted, tolerance, pass});
}

/// Uncapped (d + 2)(theta - 1)/p, for reporting fitted thetas that may leave the range.
double raw_embedding(double p, double theta, int dim) { return (dim + 2) * (theta - 1.0) / p; }

}  // namespace

const char* preset_name(Preset preset) noexcept {
  for (const auto& [name, p] : kPresets)
    if (p == preset) return name;
  return "?";
}

Preset preset_from_name(const std::string& name) {
  for (const auto& [n, p] : kPresets)
    if (name == n) return p;
  fail(ErrorCode::ConfigError, "unknown experiment '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig default_config(Preset preset) {
  ExperimentConfig c;
  c.experiment = preset;
  c.noise.horizon = 1.0;
  c.noise.steps = 256;
  c.window.half_width = 1.0;
  c.window.stride = 2;
  c.g.family = TestFamily::ParabolicHolder;
  c.g.beta = 0.5;
  switch (preset) {
    case Preset::KernelAudit:
      break;
    case Preset::BrownianRegularity:
      c.noise.kind = NoiseKind::Brownian;
      break;
    case Preset::PoissonRegularity:
      c.kernel.alpha = 1.5;
      c.noise.kind = NoiseKind::CompensatedPoisson;
      c.noise.jump = JumpSpec{};
      break;
    case Preset::FractionalSweep:
      c.sweep = {{1.0, 0.0}, {1.0, 0.25}, {1.5, 0.0}, {1.5, 0.3}, {2.0, 0.5}};
      c.tolerances.exponent = 0.2;
      break;
    case Preset::EmbeddingCheck:
      c.embedding.theta = campanato_order(c.p, c.embedding.gamma, c.embedding.dim);
      break;
  }
  // The weight in the conditions tracks the coefficient's spatial growth.
  if (regularity(preset)) c.conditions.beta = c.g.beta;
  return c;
}

void ExperimentConfig::validate() const {
  require(p >= 1.0, ErrorCode::InvalidArgument, "p must be >= 1");
  require(tolerances.exponent > 0.0 && tolerances.oracle > 0.0 && tolerances.moment_sigma > 0.0,
          ErrorCode::InvalidArgument, "tolerances must be positive");
  switch (experiment) {
    case Preset::KernelAudit:
      kernel.validate();
      condition_probe(kernel).validate();
      require(conditions.mass_points >= 4, ErrorCode::InvalidArgument,
              "conditions.mass_points must be >= 4");
      break;
    case Preset::BrownianRegularity:
    case Preset::PoissonRegularity: {
      const bool poisson = experiment == Preset::PoissonRegularity;
      require(poisson == (noise.kind == NoiseKind::CompensatedPoisson), ErrorCode::ConfigError,
              std::string(preset_name(experiment)) + " needs " + (poisson ? "poisson" : "brownian") +
                  " noise");
      kernel.validate();
      noise.validate();
      g.validate();
      condition_probe(kernel).validate();
      require(realizations >= 30, ErrorCode::EnsembleTooSmall, "realizations must be >= 30");
      require(pairs.count >= 1 && !pairs.lags.empty(), ErrorCode::EmptyRequest,
              "pairs need a positive count and at least one lag");
      require(pairs.lags.size() >= 2, ErrorCode::InvalidArgument, "need at least two lags");
      require(cylinders.count >= 1, ErrorCode::EmptyRequest, "cylinders.count must be >= 1");
      for (const auto& c : cylinders.centers)
        require(static_cast<int>(c.x.size()) == kernel.dim, ErrorCode::DimensionMismatch,
                "cylinder center dimension differs from the kernel");
      require(window.stride >= 1, ErrorCode::InvalidArgument, "window.stride must be >= 1");
      resolved_grid();
      break;
    }
    case Preset::FractionalSweep:
      require(!sweep.empty(), ErrorCode::EmptyRequest, "sweep needs at least one (alpha, epsilon)");
      for (const auto& [a, e] : sweep) {
        KernelSpec k = kernel;
        k.alpha = a;
        k.epsilon = e;
        k.validate();
        condition_probe(k).validate();
      }
      break;
    case Preset::EmbeddingCheck:
      require(embedding.dim == 1 || embedding.dim == 2, ErrorCode::InvalidArgument,
              "embedding.dim must be 1 or 2");
      require(embedding.gamma > 0.0 && embedding.gamma <= 1.0, ErrorCode::InvalidArgument,
              "embedding.gamma must lie in (0, 1]");
      require(embedding.radii.size() >= 4, ErrorCode::InsufficientPoints,
              "embedding needs at least four radii");
      if (!embedding.domain.boxes.empty()) embedding.domain.validate();
      break;
  }
}

SpectralGrid ExperimentConfig::resolved_grid() const {
  if (grid) {
    require(grid->dim() == kernel.dim, ErrorCode::DimensionMismatch,
            "grid dimension differs from the kernel");
    return *grid;
  }
  return SpectralGrid::for_kernel(kernel, 0.5 * noise.dt(), noise.horizon);
}

ConditionProbe ExperimentConfig::condition_probe(const KernelSpec& k) const {
  ConditionProbe probe;
  probe.kernel = k;
  probe.kernel.method = KernelMethod::Spectral;
  probe.beta = conditions.beta;
  probe.power = conditions.power.value_or(
      experiment == Preset::PoissonRegularity ? p : 2.0);
  probe.horizon = noise.horizon;
  probe.time_pairs = dyadic_time_pairs(conditions.s, conditions.k_min, conditions.k_max);
  return probe;
}

ExperimentConfig parse_config(const Json& j) {
  check_keys(j, {"experiment", "seed", "output_dir", "kernel", "grid", "noise", "g", "window", "p",
                 "realizations", "pairs", "cylinders", "conditions", "sweep", "embedding",
                 "tolerances"},
             "config");
  require(j.contains("experiment"), ErrorCode::ConfigError, "config needs \"experiment\"");
  std::string name;
  read(j, "experiment", name, "config");
  ExperimentConfig c = default_config(preset_from_name(name));

  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "p", c.p, "config");
  read(j, "realizations", c.realizations, "config");
  if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
  if (j.contains("noise")) {
    // Kind-specific defaults apply unless the file overrides them.
    Json merged = to_json(c.noise);
    merged.erase("seed");
    for (const auto& item : j.at("noise").items()) merged[item.key()] = item.value();
    if (merged.value("kind", "") == "brownian") {
      merged.erase("jump");
      merged.erase("p0");
    }
    c.noise = noise_from_json(merged);
  }
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"), c.kernel.dim);
  if (j.contains("g")) c.g = test_function_from_json(j.at("g"));
  if (j.contains("window")) c.window = window_from_json(j.at("window"));
  c.noise.seed = c.seed;

  if (j.contains("pairs")) {
    const Json& s = j.at("pairs");
    check_keys(s, {"count", "lags", "direction"}, "pairs");
    read(s, "count", c.pairs.count, "pairs");
    read(s, "lags", c.pairs.lags, "pairs");
    if (s.contains("direction")) {
      std::string d;
      read(s, "direction", d, "pairs");
      const auto it = std::find_if(kDirections.begin(), kDirections.end(),
                                   [&](const auto& e) { return d == e.first; });
      require(it != kDirections.end(), ErrorCode::ConfigError,
              "pairs.direction: unknown value '" + d + "'");
      c.pairs.direction = it->second;
    }
  }
  if (j.contains("cylinders")) {
    const Json& s = j.at("cylinders");
    check_keys(s, {"radii", "centers", "count"}, "cylinders");
    read(s, "radii", c.cylinders.radii, "cylinders");
    read(s, "count", c.cylinders.count, "cylinders");
    if (s.contains("centers")) c.cylinders.centers = points_from(s.at("centers"), "cylinders.centers");
  }
  if (j.contains("conditions")) {
    const Json& s = j.at("conditions");
    check_keys(s, {"s", "k_min", "k_max", "beta", "power", "mass_points"}, "conditions");
    read(s, "s", c.conditions.s, "conditions");
    read(s, "k_min", c.conditions.k_min, "conditions");
    read(s, "k_max", c.conditions.k_max, "conditions");
    read(s, "beta", c.conditions.beta, "conditions");
    read(s, "mass_points", c.conditions.mass_points, "conditions");
    if (s.contains("power")) {
      double q = 0.0;
      read(s, "power", q, "conditions");
      c.conditions.power = q;
    }
  }
  if (j.contains("sweep")) {
    require(j.at("sweep").is_array(), ErrorCode::ConfigError, "sweep must be an array");
    c.sweep.clear();
    for (const auto& item : j.at("sweep")) {
      check_keys(item, {"alpha", "epsilon"}, "sweep");
      require(item.contains("alpha"), ErrorCode::ConfigError, "sweep entries need alpha");
      double a = 0.0, e = 0.0;
      read(item, "alpha", a, "sweep");
      read(item, "epsilon", e, "sweep");
      c.sweep.emplace_back(a, e);
    }
  }
  if (j.contains("embedding")) {
    const Json& s = j.at("embedding");
    check_keys(s, {"theta", "gamma", "dim", "domain", "radii", "centers", "budget"}, "embedding");
    read(s, "gamma", c.embedding.gamma, "embedding");
    read(s, "dim", c.embedding.dim, "embedding");
    c.embedding.theta = campanato_order(c.p, c.embedding.gamma, c.embedding.dim);
    read(s, "theta", c.embedding.theta, "embedding");
    read(s, "radii", c.embedding.radii, "embedding");
    read(s, "budget", c.embedding.budget, "embedding");
    if (s.contains("domain")) c.embedding.domain = domain_from(s.at("domain"));
    if (s.contains("centers")) c.embedding.centers = points_from(s.at("centers"), "embedding.centers");
  } else if (c.experiment == Preset::EmbeddingCheck) {
    c.embedding.theta = campanato_order(c.p, c.embedding.gamma, c.embedding.dim);
  }
  if (j.contains("tolerances")) {
    const Json& s = j.at("tolerances");
    check_keys(s, {"exponent", "oracle", "moment_sigma"}, "tolerances");
    read(s, "exponent", c.tolerances.exponent, "tolerances");
    read(s, "oracle", c.tolerances.oracle, "tolerances");
    read(s, "moment_sigma", c.tolerances.moment_sigma, "tolerances");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["experiment"] = preset_name(c.experiment);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["kernel"] = to_json(c.kernel);
  if (c.grid) j["grid"] = to_json(*c.grid);
  j["noise"] = to_json(c.noise);
  j["g"] = to_json(c.g);
  j["window"] = to_json(c.window);
  j["p"] = c.p;
  j["realizations"] = c.realizations;
  const auto dir = std::find_if(kDirections.begin(), kDirections.end(),
                                [&](const auto& e) { return e.second == c.pairs.direction; });
  j["pairs"] = {{"count", c.pairs.count}, {"lags", c.pairs.lags}, {"direction", dir->first}};
  j["cylinders"] = {{"radii", c.cylinders.radii},
                    {"centers", points_json(c.cylinders.centers)},
                    {"count", c.cylinders.count}};
  Json cond{{"s", c.conditions.s},
            {"k_min", c.conditions.k_min},
            {"k_max", c.conditions.k_max},
            {"beta", c.conditions.beta},
            {"mass_points", c.conditions.mass_points}};
  if (c.conditions.power) cond["power"] = *c.conditions.power;
  j["conditions"] = cond;
  Json sweep = Json::array();
  for (const auto& [a, e] : c.sweep) sweep.push_back({{"alpha", a}, {"epsilon", e}});
  j["sweep"] = sweep;
  Json emb{{"theta", c.embedding.theta},
           {"gamma", c.embedding.gamma},
           {"dim", c.embedding.dim},
           {"radii", c.embedding.radii},
           {"centers", points_json(c.embedding.centers)},
           {"budget", c.embedding.budget}};
  if (!c.embedding.domain.boxes.empty()) emb["domain"] = domain_json(c.embedding.domain);
  j["embedding"] = emb;
  j["tolerances"] = {{"exponent", c.tolerances.exponent},
                     {"oracle", c.tolerances.oracle},
                     {"moment_sigma", c.tolerances.moment_sigma}};
  return j;
}

// ---------------------------------------------------------------------------
// Stages

Json to_json(const PowerFit& fit) {
  return Json{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"stderr", fit.stderr},
              {"points", fit.points},
              {"value_decades", fit.value_decades},
              {"narrow_span", fit.narrow_span}};
}

Json to_json(const SeminormReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"radius", row.radius},
                    {"measure", row.measure},
                    {"value", row.value},
                    {"mean_deviation", row.mean_deviation},
                    {"pair_average", row.pair_average},
                    {"stderr", row.stderr},
                    {"centers", row.centers},
                    {"pairwise_dominates", row.pairwise_dominates}});
  Json j{{"kind", r.kind}, {"p", r.p}, {"theta", r.theta}, {"alpha", r.alpha},
         {"sup", r.sup},   {"fitted", r.fitted}};
  if (r.fitted) {
    j["fit"] = to_json(r.fit);
    j["fitted_exponent"] = r.fitted_exponent;
  }
  j["pairwise_dominates"] = r.pairwise_dominates;
  if (!r.warning.empty()) j["warning"] = r.warning;
  j["rows"] = std::move(rows);
  return j;
}

Json condition_stage(const ExperimentConfig& config, const KernelSpec& kernel,
                     ConditionReport* out) {
  const ConditionProbe probe = config.condition_probe(kernel);
  ConditionReport rep = audit_conditions(probe);
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"s", r.pair.s},
                    {"t", r.pair.t},
                    {"lag", r.pair.t - r.pair.s},
                    {"increment", r.increment},
                    {"mass", r.mass},
                    {"tail", r.tail}});
  std::vector<std::pair<double, double>> mass_data;
  Json sweep = Json::array();
  for (int k = 0; k < config.conditions.mass_points; ++k) {
    const double s = probe.horizon * std::ldexp(1.0, -k);
    const double m = condition_mass(probe, s);
    mass_data.emplace_back(s, m);
    sweep.push_back({{"s", s}, {"mass", m}});
  }
  const PowerFit mass_fit = fit_exponent(mass_data);
  Json j{{"kernel", to_json(kernel)},
         {"beta", probe.beta},
         {"power", probe.power},
         {"horizon", probe.horizon},
         {"rows", rows},
         {"gamma1", to_json(rep.gamma1)},
         {"gamma2", to_json(rep.gamma2)},
         {"predicted_gamma", rep.predicted_gamma},
         {"n0", rep.n0_estimate},
         {"mass_sweep", sweep},
         {"mass_fit", to_json(mass_fit)},
         {"predicted_mass_exponent", 1.0 - probe.power * kernel.epsilon / kernel.alpha}};
  if (out) *out = std::move(rep);
  return j;
}

FieldEnsemble simulation_stage(const ExperimentConfig& config) {
  const SpectralGrid grid = config.resolved_grid();
  NoiseSpec noise = config.noise;
  noise.seed = config.seed;
  if (noise.kind == NoiseKind::Brownian)
    return convolve_brownian(config.kernel, grid, config.g, noise, config.realizations,
                             config.window);
  return convolve_poisson(config.kernel, grid, config.g, noise, config.realizations,
                          config.window);
}

MomentField moment_stage(const ExperimentConfig& config, const FieldEnsemble& ensemble) {
  PairRequest req;
  req.rule = PairRule::DyadicLag;
  req.count = config.pairs.count;
  req.lags = config.pairs.lags;
  req.direction = config.pairs.direction;
  req.seed = config.seed + 1;
  const auto pairs = sample_pairs(ensemble, req);
  return estimate_pair_moments(ensemble, pairs, config.p);
}

MomentField cylinder_moment_stage(const ExperimentConfig& config, const FieldEnsemble& ensemble) {
  PairRequest req;
  req.rule = PairRule::WithinCylinder;
  req.count = config.cylinders.count;
  req.seed = config.seed + 2;
  for (const auto& c : config.cylinders.centers)
    for (double r : config.cylinders.radii) req.cylinders.push_back({c, r});
  const auto pairs = sample_pairs(ensemble, req);
  MomentField field = estimate_pair_moments(ensemble, pairs, config.p);
  field.cylinders = req.cylinders;
  return field;
}

SeminormReport embedding_stage(const ExperimentConfig& config) {
  const auto& e = config.embedding;
  embedding_exponent(config.p, e.theta, e.dim);  // rejects theta outside (1, 1 + p/(d+2)]
  const DomainSpec domain = e.domain.boxes.empty() ? default_domain(e.dim) : e.domain;
  SeminormOptions opt;
  opt.radii = e.radii;
  opt.budget = e.budget;
  opt.seed = config.seed;
  opt.explicit_centers = e.centers;
  if (opt.explicit_centers.empty())
    opt.explicit_centers.push_back({0.0, std::vector<double>(e.dim, 0.0)});
  const double gamma = e.gamma;
  auto field = [gamma](const SpaceTimePoint& X) {
    double r2 = 0.0;
    for (double v : X.x) r2 += v * v;
    return std::pow(r2, 0.5 * gamma) + std::pow(std::max(X.t, 0.0), 0.5 * gamma);
  };
  return campanato_seminorm(field, domain, config.p, e.theta, opt);
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

/// Exact second moments of the discrete scheme for the field's pairs.
std::vector<double> oracle_moments(const FieldEnsemble& ens, const MomentField& field) {
  const PropagatorTable table = propagators_for(ens);
  const double var = driver_variance(ens.noise, ens.g);
  std::vector<double> out(field.pairs.size());
  const auto n = static_cast<long>(out.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long k = 0; k < n; ++k) {
    const auto& pr = field.pairs[k];
    out[k] = isometry_second_moment(table, var, ens.time_index(pr.first.t),
                                    ens.window_index(pr.first.x), ens.time_index(pr.second.t),
                                    ens.window_index(pr.second.x));
  }
  return out;
}

struct LagCheck {
  double oracle = 0.0;
  double stderr = 0.0;  ///< across realizations of the per-realization lag average
  double z = 0.0;
};

/// Per requested lag (ascending, as in summarize_by_lag): Monte Carlo mean of the lag-averaged
/// squared increment against the oracle. The standard error comes from the spread of the
/// per-realization averages, so correlation between pairs sharing a realization is accounted for.
std::vector<LagCheck> lag_checks(const FieldEnsemble& ens, const MomentField& field,
                                 const std::vector<double>& oracle) {
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < field.pairs.size(); ++k)
    groups[field.pairs[k].requested_lag].push_back(k);
  struct Slots {
    int i, j;
    std::size_t a, b;
  };
  std::vector<LagCheck> out;
  for (const auto& [lag, members] : groups) {
    std::vector<Slots> slots;
    LagCheck c;
    for (std::size_t k : members) {
      const auto& pr = field.pairs[k];
      slots.push_back({ens.time_index(pr.first.t), ens.time_index(pr.second.t),
                       ens.window_index(pr.first.x), ens.window_index(pr.second.x)});
      c.oracle += oracle[k] / members.size();
    }
    const int M = ens.realizations;
    double sum = 0.0, sum2 = 0.0;
    for (int m = 0; m < M; ++m) {
      double avg = 0.0;
      for (const auto& s : slots) {
        const double d = ens.at(m, s.i, s.a) - ens.at(m, s.j, s.b);
        avg += d * d;
      }
      avg /= slots.size();
      sum += avg;
      sum2 += avg * avg;
    }
    const double mean = sum / M;
    c.stderr = std::sqrt(std::max(0.0, (sum2 - M * mean * mean) / (M - 1)) / M);
    c.z = c.stderr > 0.0 ? (mean - c.oracle) / c.stderr : 0.0;
    out.push_back(c);
  }
  return out;
}

void run_regularity(const ExperimentConfig& cfg, ExperimentReport& r, Stages& st) {
  ConditionReport cond;
  r.modules["conditions"] = st.run("conditions", [&] { return condition_stage(cfg, cfg.kernel, &cond); });
  const double predicted = std::min({cond.gamma1.slope, cond.gamma2.slope, cfg.g.beta});

  const FieldEnsemble ens = st.run("simulation", [&] { return simulation_stage(cfg); });
  r.modules["simulation"] = {{"grid", to_json(ens.grid)},
                             {"realizations", ens.realizations},
                             {"steps", ens.steps()},
                             {"dt", ens.dt()},
                             {"window_points", ens.window_size()},
                             {"driver_variance", driver_variance(ens.noise, ens.g)}};

  const MomentField field = st.run("moments", [&] { return moment_stage(cfg, ens); });
  const PowerFit fit = fit_moment_exponent(field);
  Json moments{{"p", field.p},
               {"pairs", field.pairs.size()},
               {"fit", to_json(fit)},
               {"fit_spatial", to_json(fit_moment_exponent(field, 0))},
               {"fit_temporal", to_json(fit_moment_exponent(field, 1))}};

  std::optional<PowerFit> oracle_fit;
  std::vector<LagCheck> checks;
  if (cfg.p == 2.0) {
    const std::vector<double> oracle = st.run("oracle", [&] { return oracle_moments(ens, field); });
    MomentField exact = field;
    exact.estimate = oracle;
    oracle_fit = fit_moment_exponent(exact);
    moments["oracle_fit"] = to_json(*oracle_fit);
    checks = lag_checks(ens, field, oracle);
  }
  Json by_lag = Json::array();
  const auto summary = summarize_by_lag(field);
  for (std::size_t l = 0; l < summary.size(); ++l) {
    const auto& s = summary[l];
    Json row{{"lag", s.lag}, {"delta", s.delta}, {"estimate", s.estimate},
             {"stderr", s.stderr}, {"pairs", s.pairs}};
    if (!checks.empty()) {
      row["oracle"] = checks[l].oracle;
      row["realization_stderr"] = checks[l].stderr;
      row["z"] = checks[l].z;
    }
    by_lag.push_back(std::move(row));
  }
  moments["by_lag"] = std::move(by_lag);
  r.modules["moments"] = std::move(moments);

  const int dim = cfg.kernel.dim;
  const double theta = campanato_order(cfg.p, std::clamp(predicted, 1e-3, 1.0), dim);
  const SeminormReport camp = st.run("seminorm", [&] {
    return campanato_seminorm(cylinder_moment_stage(cfg, ens), theta);
  });
  Json cj = to_json(camp);
  if (camp.fitted) cj["gamma_from_theta"] = raw_embedding(cfg.p, camp.fitted_exponent, dim);
  r.modules["campanato"] = std::move(cj);

  add_verdict(r, "holder exponent of the p-moment field", predicted, fit.slope,
              cfg.tolerances.exponent);
  if (oracle_fit) {
    add_verdict(r, "exponent agrees with the exact isometry oracle", oracle_fit->slope, fit.slope,
                cfg.tolerances.oracle);
    double worst = 0.0;
    for (const auto& c : checks) worst = std::max(worst, std::abs(c.z));
    add_verdict(r, "lag-averaged moments vs oracle, max |z| over lags", 0.0, worst,
                cfg.tolerances.moment_sigma);
  }
}

void run_kernel_audit(const ExperimentConfig& cfg, ExperimentReport& r, Stages& st) {
  const Json j = st.run("conditions", [&] { return condition_stage(cfg, cfg.kernel); });
  r.modules["conditions"] = j;
  const double pred = j["predicted_gamma"].get<double>();
  add_verdict(r, "gamma1 (increment condition)", pred, j["gamma1"]["slope"].get<double>(),
              cfg.tolerances.exponent);
  add_verdict(r, "gamma2 (tail condition)", pred, j["gamma2"]["slope"].get<double>(),
              cfg.tolerances.exponent);
  add_verdict(r, "mass condition exponent", j["predicted_mass_exponent"].get<double>(),
              j["mass_fit"]["slope"].get<double>(), cfg.tolerances.exponent);
}

void run_sweep(const ExperimentConfig& cfg, ExperimentReport& r, Stages& st) {
  Json entries = Json::array();
  for (const auto& [a, e] : cfg.sweep) {
    KernelSpec k = cfg.kernel;
    k.alpha = a;
    k.epsilon = e;
    std::ostringstream label;
    label << "alpha=" << a << " epsilon=" << e;
    const Json j = st.run("conditions " + label.str(), [&] { return condition_stage(cfg, k); });
    const double pred = j["predicted_gamma"].get<double>();
    add_verdict(r, "gamma1 at " + label.str(), pred, j["gamma1"]["slope"].get<double>(),
                cfg.tolerances.exponent);
    add_verdict(r, "gamma2 at " + label.str(), pred, j["gamma2"]["slope"].get<double>(),
                cfg.tolerances.exponent);
    entries.push_back(j);
  }
  r.modules["sweep"] = std::move(entries);
}

void run_embedding(const ExperimentConfig& cfg, ExperimentReport& r, Stages& st) {
  const auto& e = cfg.embedding;
  const SeminormReport rep = st.run("embedding", [&] { return embedding_stage(cfg); });
  Json j = to_json(rep);
  j["configured_alpha"] = embedding_exponent(cfg.p, e.theta, e.dim);
  const double gamma_hat =
      rep.fitted ? raw_embedding(cfg.p, rep.fitted_exponent, e.dim)
                 : std::numeric_limits<double>::quiet_NaN();
  j["gamma_from_theta"] = gamma_hat;
  r.modules["campanato"] = std::move(j);
  add_verdict(r, "embedding exponent of the fitted theta", e.gamma, gamma_hat,
              cfg.tolerances.exponent);
}

}  // namespace

bool ExperimentReport::passed() const {
  return status == "ok" && std::all_of(verdicts.begin(), verdicts.end(),
                                       [](const Verdict& v) { return v.pass; });
}

int ExperimentReport::exit_code() const {
  if (status == "invalid-config") return 2;
  if (status == "numerical-failure" || status == "failed") return 3;
  return passed() ? 0 : 1;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  ExperimentReport r;
  r.config = to_json(config);
  Stages st(r);
  const auto start = std::chrono::steady_clock::now();
  try {
    st.run("config", [&] { config.validate(); });
    switch (config.experiment) {
      case Preset::KernelAudit: run_kernel_audit(config, r, st); break;
      case Preset::BrownianRegularity:
      case Preset::PoissonRegularity: run_regularity(config, r, st); break;
      case Preset::FractionalSweep: run_sweep(config, r, st); break;
      case Preset::EmbeddingCheck: run_embedding(config, r, st); break;
    }
    if (!r.passed()) r.status = "verdict-failed";
  } catch (const Error& e) {
    r.status = is_numerical(e.code()) ? "numerical-failure" : "invalid-config";
    r.failed_stage = st.current();
    r.error = e.what();
  } catch (const std::exception& e) {
    r.status = "failed";
    r.failed_stage = st.current();
    r.error = e.what();
  }
  r.timing["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Persistence

Json report_json(const ExperimentReport& r) {
  Json j;
  j["config"] = r.config;
  j["config"].erase("output_dir");  // where a run lands is not part of its result
  j["status"] = r.status;
  if (!r.failed_stage.empty()) {
    j["failed_stage"] = r.failed_stage;
    j["error"] = r.error;
  }
  j["rng"] = {{"engine", "mt19937_64"},
              {"seeding", "seed_seq(seed, stream); stream = realization index"},
              {"seed", r.config.value("seed", std::uint64_t{0})}};
  j["modules"] = r.modules;
  Json v = Json::array();
  for (const auto& x : r.verdicts)
    v.push_back({{"claim", x.claim},
                 {"predicted", x.predicted},
                 {"fitted", x.fitted},
                 {"tolerance", x.tolerance},
                 {"pass", x.pass}});
  j["verdicts"] = std::move(v);
  return j;
}

ExperimentReport report_from_json(const Json& j) {
  ExperimentReport r;
  try {
    r.config = j.at("config");
    r.status = j.at("status").get<std::string>();
    r.failed_stage = j.value("failed_stage", "");
    r.error = j.value("error", "");
    r.modules = j.value("modules", Json::object());
    for (const auto& v : j.at("verdicts"))
      r.verdicts.push_back({v.at("claim").get<std::string>(),
                            v.at("predicted").is_number() ? v.at("predicted").get<double>() : NAN,
                            v.at("fitted").is_number() ? v.at("fitted").get<double>() : NAN,
                            v.at("tolerance").get<double>(), v.at("pass").get<bool>()});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("report: ") + e.what());
  }
  return r;
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create " + dir.string());
  auto write = [&](const std::filesystem::path& name, const std::string& text) {
    std::ofstream out(dir / name);
    require(out.good(), ErrorCode::IoError, "cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report_json(r).dump(2) + "\n");
  write("timing.json", r.timing.dump(2) + "\n");
  if (!r.failed_stage.empty())
    write("FAILED", "stage: " + r.failed_stage + "\nerror: " + r.error + "\n");
  else
    std::filesystem::remove(dir / "FAILED", ec);
}

// ---------------------------------------------------------------------------
// Plot data

namespace {

struct Series {
  std::vector<double> x, y;
  std::vector<std::vector<double>> extra;  ///< extra columns before the log columns
};

/// Writes raw columns, log columns and the OLS line of log y on log x (blank when unfittable).
void write_series(const std::filesystem::path& path, const std::vector<std::string>& header,
                  const Series& s) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  std::vector<std::pair<double, double>> data;
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (s.x[i] > 0.0 && s.y[i] > 0.0) data.emplace_back(s.x[i], s.y[i]);
  // Plain least squares for the drawn line; the acceptance fits live in the report.
  std::optional<std::pair<double, double>> line;  // intercept, slope
  if (data.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : data) mx += std::log(x) / data.size(), my += std::log(y) / data.size();
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, y] : data) {
      sxy += (std::log(x) - mx) * (std::log(y) - my);
      sxx += (std::log(x) - mx) * (std::log(x) - mx);
    }
    if (sxx > 0.0) line.emplace(my - sxy / sxx * mx, sxy / sxx);
  }
  out << std::setprecision(17);
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    out << s.x[i] << ',' << s.y[i];
    for (const auto& col : s.extra) out << ',' << col[i];
    const bool pos = s.x[i] > 0.0 && s.y[i] > 0.0;
    out << ',';
    if (pos) out << std::log(s.x[i]);
    out << ',';
    if (pos) out << std::log(s.y[i]);
    out << ',';
    if (pos && line) out << line->first + line->second * std::log(s.x[i]);
    out << '\n';
  }
}

const std::vector<std::string> kConditionHeader{"scale", "value", "log_scale", "log_value",
                                                "fit_log_value"};

std::vector<std::string> emit_conditions(const Json& cond, const std::filesystem::path& dir,
                                         const std::string& suffix, bool with_mass) {
  Series inc, mass, tail;
  if (cond.is_object()) {
    for (const auto& row : cond.at("rows")) {
      const double lag = row.at("lag").get<double>();
      inc.x.push_back(lag);
      inc.y.push_back(row.at("increment").get<double>());
      tail.x.push_back(lag);
      tail.y.push_back(row.at("tail").get<double>());
    }
    for (const auto& row : cond.at("mass_sweep")) {
      mass.x.push_back(row.at("s").get<double>());
      mass.y.push_back(row.at("mass").get<double>());
    }
  }
  std::vector<std::string> files{"condition_increment" + suffix + ".csv",
                                 "condition_tail" + suffix + ".csv"};
  write_series(dir / files[0], kConditionHeader, inc);
  write_series(dir / files[1], kConditionHeader, tail);
  if (with_mass) {
    files.insert(files.begin() + 1, "condition_mass" + suffix + ".csv");
    write_series(dir / files[1], kConditionHeader, mass);
  }
  return files;
}

std::string campanato_file(const Json& camp, const std::filesystem::path& dir) {
  Series s;
  if (camp.is_object())
    for (const auto& row : camp.at("rows")) {
      s.x.push_back(row.at("measure").get<double>());
      s.y.push_back(row.at("pair_average").get<double>());
      s.extra.resize(1);
      s.extra[0].push_back(row.at("radius").get<double>());
    }
  if (s.extra.empty()) s.extra.resize(1);
  write_series(dir / "campanato_scales.csv",
               {"measure", "pair_average", "radius", "log_measure", "log_pair_average",
                "fit_log_pair_average"},
               s);
  return "campanato_scales.csv";
}

std::string lag_file(const ExperimentReport& r, const std::filesystem::path& dir) {
  // One row per configured lag, in config order.
  Series s;
  s.extra.resize(3);
  const Json* moments = r.modules.contains("moments") ? &r.modules.at("moments") : nullptr;
  if (moments && r.config.contains("pairs")) {
    for (const auto& lag_j : r.config.at("pairs").at("lags")) {
      const double lag = lag_j.get<double>();
      for (const auto& row : moments->at("by_lag")) {
        if (row.at("lag").get<double>() != lag) continue;
        s.x.push_back(row.at("delta").get<double>());
        s.y.push_back(row.at("estimate").get<double>());
        s.extra[0].push_back(lag);
        s.extra[1].push_back(row.at("stderr").get<double>());
        s.extra[2].push_back(row.contains("oracle") ? row.at("oracle").get<double>() : NAN);
      }
    }
  }
  write_series(dir / "lag_moment.csv",
               {"delta", "estimate", "lag", "stderr", "oracle", "log_delta", "log_estimate",
                "fit_log_estimate"},
               s);
  return "lag_moment.csv";
}

std::string sweep_suffix(double a, double e) {
  std::ostringstream s;
  s << "_alpha" << a << "_eps" << e;
  return s.str();
}

}  // namespace

std::vector<std::string> emit_plot_data(const ExperimentReport& r,
                                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::IoError, "cannot create " + dir.string());
  const Preset preset = preset_from_name(r.config.value("experiment", std::string("?")));
  auto module = [&](const char* name) {
    return r.modules.contains(name) ? r.modules.at(name) : Json();
  };
  std::vector<std::string> files;
  auto append = [&](const std::vector<std::string>& more) {
    files.insert(files.end(), more.begin(), more.end());
  };
  switch (preset) {
    case Preset::KernelAudit:
      append(emit_conditions(module("conditions"), dir, "", true));
      break;
    case Preset::BrownianRegularity:
    case Preset::PoissonRegularity:
      files.push_back(lag_file(r, dir));
      files.push_back(campanato_file(module("campanato"), dir));
      append(emit_conditions(module("conditions"), dir, "", true));
      break;
    case Preset::FractionalSweep: {
      const Json sweep = module("sweep");
      const Json& cfg = r.config.at("sweep");
      for (std::size_t i = 0; i < cfg.size(); ++i) {
        const double a = cfg[i].at("alpha").get<double>();
        const double e = cfg[i].at("epsilon").get<double>();
        const Json entry = sweep.is_array() && i < sweep.size() ? sweep[i] : Json();
        append(emit_conditions(entry, dir, sweep_suffix(a, e), false));
      }
      break;
    }
    case Preset::EmbeddingCheck:
      files.push_back(campanato_file(module("campanato"), dir));
      break;
  }
  return files;
}

}  // namespace stochlab
