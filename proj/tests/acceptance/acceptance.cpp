// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 only if all pass.

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "oracles/oracles.hpp"
#include "stochlab/campanato.hpp"
#include "stochlab/experiment.hpp"
#include "stochlab/noise.hpp"
#include "support.hpp"

using namespace stochlab;

namespace {

// Tolerances.
constexpr double kMassTol = 1e-6;
constexpr double kClosedFormRelTol = 1e-4;
constexpr double kClosedFormFloor = 1e-10;
constexpr double kGaussianLo = 0.85, kGaussianHi = 1.15;
constexpr double kSweepTol = 0.2;
constexpr double kSigmas = 3.0;
constexpr int kIsometryPaths = 10000;
constexpr double kBrownianTol = 0.15;
constexpr double kOracleTol = 0.05;
constexpr double kPoissonTol = 0.2;
constexpr double kGridTol = 0.05;
constexpr double kRoundTripTol = 1e-14;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok) { pass = pass && ok; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ExperimentConfig preset_config(const std::string& file) {
  return load_config(std::string(STOCHLAB_CONFIG_DIR) + "/" + file);
}

const Verdict* find_verdict(const ExperimentReport& r, const std::string& claim) {
  for (const auto& v : r.verdicts)
    if (v.claim == claim) return &v;
  return nullptr;
}

// (alpha, eps) -> (gamma1, gamma2) from criterion 4, reused by criterion 7.
std::map<std::pair<double, double>, std::pair<double, double>> sweep_fits;

void kernel_mass(Outcome& o) {
  double worst = 0.0;
  for (double alpha : {0.5, 1.0, 1.5, 2.0})
    for (int d : {1, 2})
      for (double t : {0.01, 0.1, 1.0}) {
        const KernelSpec k{alpha, 0.0, d};
        const auto g = testing::resolving_grid(k, t);
        const double err = std::abs(testing::lattice_integral(eval_kernel(k, g, t), g) - 1.0);
        worst = std::max(worst, err);
        if (err > kMassTol)
          o.detail << "alpha=" << alpha << " d=" << d << " t=" << t << " off by " << fmt(err) << "; ";
      }
  o.require(worst <= kMassTol);
  o.detail << "24 configurations, max |mass - 1| = " << fmt(worst);
}

void closed_forms(Outcome& o) {
  double worst = 0.0;
  auto compare = [&](const KernelSpec& k, double t, auto&& exact) {
    const auto g = SpectralGrid::for_kernel(k, t, t);
    const auto v = eval_kernel(k, g, t);
    const int n = g.points_per_axis();
    const double period = 2.0 * g.half_width();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::vector<double> x;
      if (k.dim == 1) {
        x = {g.coordinate(static_cast<int>(i))};
      } else {
        x = {g.coordinate(static_cast<int>(i) / n), g.coordinate(static_cast<int>(i) % n)};
      }
      const double ref = exact(t, x, period);
      if (ref > kClosedFormFloor) worst = std::max(worst, std::abs(v[i] / ref - 1.0));
    }
  };
  for (double t : {0.05, 0.1, 1.0}) {
    compare(KernelSpec{2.0, 0.0, 1}, t, oracle::gaussian_periodic);
    compare(KernelSpec{1.0, 0.0, 1}, t, [](double s, const std::vector<double>& x, double p) {
      return oracle::cauchy_periodic(s, x[0], p);
    });
  }
  compare(KernelSpec{2.0, 0.0, 2}, 0.1, oracle::gaussian_periodic);
  o.require(worst <= kClosedFormRelTol);
  o.detail << "Gaussian (d=1,2) and Cauchy, max relative error " << fmt(worst);
}

ConditionReport audit(double alpha, double eps, double beta) {
  ConditionProbe p;
  p.kernel = KernelSpec{alpha, eps, 1};
  p.beta = beta;
  p.power = 2.0;
  p.horizon = 1.0;
  p.time_pairs = dyadic_time_pairs(0.5, 2, 9);
  return audit_conditions(p);
}

void gaussian_conditions(Outcome& o) {
  for (double beta : {0.0, 0.3, 0.5}) {
    const auto r = audit(2.0, 0.0, beta);
    const double g1 = r.gamma1.slope, g2 = r.gamma2.slope;
    o.require(g1 >= kGaussianLo && g1 <= kGaussianHi && g2 >= kGaussianLo && g2 <= kGaussianHi);
    o.detail << "beta=" << beta << ": gamma1 " << fmt(g1) << " gamma2 " << fmt(g2) << "; ";
  }
  o.detail << "lags 2^-2..2^-9";
}

void fractional_sweep(Outcome& o) {
  for (auto [alpha, eps] : {std::pair{1.0, 0.0}, {1.0, 0.25}, {1.5, 0.0}, {1.5, 0.3}, {2.0, 0.5}}) {
    const auto r = audit(alpha, eps, 0.0);
    const double predicted = (alpha - 2.0 * eps) / alpha;
    const double g1 = r.gamma1.slope, g2 = r.gamma2.slope;
    sweep_fits[{alpha, eps}] = {g1, g2};
    o.require(std::abs(g1 - predicted) <= kSweepTol && std::abs(g2 - predicted) <= kSweepTol);
    o.detail << "(" << alpha << "," << eps << ") predicted " << fmt(predicted) << " gamma1 "
             << fmt(g1) << " gamma2 " << fmt(g2) << "; ";
  }
}

struct Moment {
  double mean = 0.0, stderr = 0.0;
};

Moment second_moment(const std::function<double(int)>& sample) {
  double s = 0.0, s2 = 0.0;
  for (int m = 0; m < kIsometryPaths; ++m) {
    const double v = sample(m);
    s += v * v;
    s2 += v * v * v * v;
  }
  const double n = kIsometryPaths;
  const double mean = s / n;
  return {mean, std::sqrt((s2 / n - mean * mean) / (n - 1.0))};
}

void isometries(Outcome& o) {
  NoiseSpec b;
  b.steps = 400;
  b.seed = 31;
  const std::vector<std::pair<std::string, std::function<double(double)>>> ito{
      {"1", [](double) { return 1.0; }},
      {"1+t^2", [](double t) { return 1.0 + t * t; }},
      {"cos(2 pi t)", [](double t) { return std::cos(2.0 * std::numbers::pi * t); }}};
  for (const auto& [name, h] : ito) {
    const double ref = oracle::integrate([&](double t) { return h(t) * h(t); }, 0.0, 1.0);
    const auto m = second_moment([&](int k) { return ito_integral(sample_path(b, k), h); });
    const double z = (m.mean - ref) / m.stderr;
    o.require(std::abs(z) <= kSigmas);
    o.detail << "Ito " << name << " z=" << fmt(z) << "; ";
  }

  NoiseSpec p = b;
  p.kind = NoiseKind::CompensatedPoisson;
  p.steps = 100;
  JumpSpec j;
  j.rate = 1.0;
  j.lambda = 5.0;
  p.jump = j;
  const std::vector<std::pair<std::string, MarkTimeFunction>> jumps{
      {"z", [](double, double z) { return z; }},
      {"sin(3t) z/(1+|z|)", [](double t, double z) { return std::sin(3.0 * t) * z / (1.0 + std::abs(z)); }},
      {"(1+t) min(|z|,1)", [](double t, double z) { return (1.0 + t) * std::min(std::abs(z), 1.0); }}};
  for (const auto& [name, h] : jumps) {
    const double ref = oracle::poisson_isometry(h, j.rate, j.lambda, p.horizon);
    const auto m = second_moment([&](int k) { return compensated_integral(sample_path(p, k), h); });
    const double z = (m.mean - ref) / m.stderr;
    o.require(std::abs(z) <= kSigmas);
    o.detail << "Poisson " << name << " z=" << fmt(z) << "; ";
  }
  o.detail << "M=" << kIsometryPaths;
}

void brownian_regularity(Outcome& o) {
  for (double beta : {0.3, 0.5}) {
    auto cfg = preset_config("brownian_regularity.json");
    cfg.g.beta = beta;
    cfg.conditions.beta = beta;
    const auto r = run_experiment(cfg);
    const Verdict* fit = find_verdict(r, "holder exponent of the p-moment field");
    const Verdict* oracle = find_verdict(r, "exponent agrees with the exact isometry oracle");
    if (!fit || !oracle) {
      o.require(false);
      o.detail << "beta=" << beta << ": run " << r.status << " at " << r.failed_stage << " "
               << r.error << "; ";
      continue;
    }
    const bool near_beta = std::abs(fit->fitted - beta) <= kBrownianTol;
    const bool near_oracle = std::abs(oracle->fitted - oracle->predicted) <= kOracleTol;
    o.require(near_beta && near_oracle);
    o.detail << "beta=" << beta << ": fitted " << fmt(fit->fitted) << " (target " << beta << " +- "
             << kBrownianTol << "), exact oracle " << fmt(oracle->predicted) << " (MC within "
             << kOracleTol << ": " << (near_oracle ? "yes" : "no") << "); ";
  }
}

void poisson_regularity(Outcome& o) {
  const auto cfg = preset_config("poisson_regularity.json");
  const auto r = run_experiment(cfg);
  const Verdict* fit = find_verdict(r, "holder exponent of the p-moment field");
  if (!fit) {
    o.require(false);
    o.detail << "run " << r.status << " at " << r.failed_stage << " " << r.error;
    return;
  }
  const auto it = sweep_fits.find({cfg.kernel.alpha, cfg.kernel.epsilon});
  const auto [g1, g2] = it != sweep_fits.end() ? it->second : std::pair{fit->predicted, fit->predicted};
  const double predicted = std::min({g1, g2, cfg.g.beta});
  o.require(std::abs(fit->fitted - predicted) <= kPoissonTol);
  o.detail << "fitted " << fmt(fit->fitted) << ", predicted min(" << fmt(g1) << ", " << fmt(g2)
           << ", " << cfg.g.beta << ") = " << fmt(predicted) << " +- " << kPoissonTol;
  if (const Verdict* oracle = find_verdict(r, "exponent agrees with the exact isometry oracle"))
    o.detail << "; exact oracle " << fmt(oracle->predicted);
}

void campanato_oracles(Outcome& o) {
  DomainSpec unit;
  unit.boxes.push_back({0.0, 1.0, {0.0}, {1.0}});
  SeminormOptions opts;
  opts.radii = {0.1, 0.2, 0.4};
  opts.budget = 128;
  const auto flat = campanato_seminorm([](const SpaceTimePoint&) { return 2.5; }, unit, 2.0, 1.2, opts);
  o.require(flat.sup == 0.0);
  o.detail << "constant sup " << flat.sup << "; ";

  double worst = 0.0;
  for (auto [center, radius] : {std::pair{SpaceTimePoint{0.5, {0.5}}, 0.25},
                                {SpaceTimePoint{0.0, {0.0}}, 0.5}, {SpaceTimePoint{0.9, {0.6}}, 0.4}}) {
    SeminormOptions lin;
    lin.radii = {radius};
    lin.budget = 4096;
    lin.seed = 7;
    lin.explicit_centers = {center};
    const auto r = campanato_seminorm([](const SpaceTimePoint& p) { return p.x[0]; }, unit, 2.0, 1.0, lin);
    const ParabolicCylinder q{center, radius};
    const double c2 = radius * radius;
    const double ref = oracle::grid_pair_average(
        [](double, double x) { return x; },
        [&](double t, double x) { return q.contains({t, {x}}) && unit.contains({t, {x}}); },
        center.t - c2, center.t + c2, center.x[0] - radius, center.x[0] + radius, 200, 2.0);
    worst = std::max(worst, std::abs(r.rows[0].pair_average / ref - 1.0));
  }
  o.require(worst <= kGridTol);
  o.detail << "linear field vs 200^2 grid, max rel " << fmt(worst) << "; ";

  double round_trip = 0.0;
  for (double p : {1.0, 2.0, 4.0})
    for (int d : {1, 2})
      for (double gamma : {0.1, 0.25, 0.5, 0.75, 1.0})
        round_trip = std::max(round_trip,
                              std::abs(embedding_exponent(p, campanato_order(p, gamma, d), d) - gamma));
  o.require(round_trip <= kRoundTripTol);
  o.detail << "embedding round trip max err " << fmt(round_trip) << "; ";

  struct Row {
    double p, theta, q, sigma;
    bool expected;
  };
  int correct = 0;
  const Row table[] = {{2, 2, 2, 2, true},     {2, 3, 2, 2, false}, {2, 2, 4, 4, true},
                       {4, 2, 2, 2, false},    {2, 3, 4, 4, true},  {2, 3, 4, 3.9, false},
                       {1, 2.5, 3, 4, false},  {1, 1.2, 3, 4, true}};
  for (const auto& row : table) correct += inclusion_holds(row.p, row.theta, row.q, row.sigma) == row.expected;
  o.require(correct == 8);
  o.detail << "inclusion table " << correct << "/8";
}

void determinism(Outcome& o) {
  for (const char* file : {"kernel_audit.json", "brownian_regularity.json", "poisson_regularity.json",
                           "fractional_sweep.json", "embedding_check.json"}) {
    const auto cfg = preset_config(file);
    const std::string a = report_json(run_experiment(cfg)).dump(2);
    const std::string b = report_json(run_experiment(cfg)).dump(2);
    o.require(a == b);
    o.detail << preset_name(cfg.experiment) << (a == b ? " identical" : " DIFFERS") << "; ";
  }
}

}  // namespace

int main() {
  const std::pair<const char*, void (*)(Outcome&)> criteria[] = {
      {"kernel mass", kernel_mass},
      {"spectral vs closed form", closed_forms},
      {"Gaussian condition exponents", gaussian_conditions},
      {"fractional exponent sweep", fractional_sweep},
      {"Ito and Poisson isometries", isometries},
      {"Brownian regularity exponent", brownian_regularity},
      {"Poisson regularity exponent", poisson_regularity},
      {"Campanato oracles", campanato_oracles},
      {"determinism", determinism},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Outcome o;
    try {
      run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    failed += !o.pass;
    std::string detail = o.detail.str();
    while (!detail.empty() && (detail.back() == ' ' || detail.back() == ';')) detail.pop_back();
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
