#include <doctest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "stochlab/error.hpp"
#include "stochlab/kernel_conditions.hpp"

using namespace stochlab;

namespace {

ConditionProbe probe(double alpha, double eps, double beta, double q = 2.0) {
  ConditionProbe p;
  p.kernel = KernelSpec{alpha, eps, 1};
  p.beta = beta;
  p.power = q;
  p.horizon = 1.0;
  return p;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

/// Raw OLS slope of one condition against t - s over s = 0.5, t - s = 2^-k.
template <class F>
double slope(F&& lhs, int kmin, int kmax) {
  std::vector<std::pair<double, double>> data;
  for (int k = kmin; k <= kmax; ++k) {
    const double lag = std::ldexp(1.0, -k);
    data.emplace_back(lag, lhs(0.5, 0.5 + lag));
  }
  return oracle::ols_loglog(data).slope;
}

}  // namespace

TEST_SUITE("kernel_conditions") {
  TEST_CASE("mass condition reduces to s for unit-mass kernels") {
    CHECK(condition_mass(probe(2.0, 0.0, 0.0), 1.0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(condition_mass(probe(1.2, 0.0, 0.0), 0.5) == doctest::Approx(0.5).epsilon(1e-4));
  }

  TEST_CASE("tail condition without weight is the time step") {
    for (double alpha : {1.0, 1.5, 2.0}) {
      const double delta = 0.0625;
      const double v = condition_tail(probe(alpha, 0.0, 0.0), 0.5, 0.5 + delta);
      CHECK(std::abs(v - delta) <= 1e-4 * delta);
    }
  }

  TEST_CASE("increment condition vanishes as t approaches s") {
    const auto p = probe(2.0, 0.0, 0.3);
    const double small = condition_increment(p, 0.5, 0.5 + 1e-4);
    const double larger = condition_increment(p, 0.5, 0.5 + 1e-2);
    CHECK(small < 1e-3 * 1.5);
    CHECK(small < larger);
    CHECK(code_of([&] { condition_increment(p, 0.5, 0.5); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("Gaussian increment and tail exponents") {
    const auto p = probe(2.0, 0.0, 0.3);
    const double g1 = slope([&](double s, double t) { return condition_increment(p, s, t); }, 3, 7);
    const double g2 = slope([&](double s, double t) { return condition_tail(p, s, t); }, 3, 7);
    CHECK(std::abs(g1 - 1.0) <= 0.15);
    CHECK(std::abs(g2 - 1.0) <= 0.15);
  }

  TEST_CASE("fractional increment exponent") {
    const auto p = probe(1.5, 0.25, 0.0);
    const double g1 = slope([&](double s, double t) { return condition_increment(p, s, t); }, 3, 8);
    CHECK(std::abs(g1 - (1.5 - 0.5) / 1.5) <= 0.2);
  }

  TEST_CASE("fractional tail exponent") {
    const auto p = probe(1.5, 0.3, 0.0);
    const double g2 = slope([&](double s, double t) { return condition_tail(p, s, t); }, 3, 8);
    CHECK(std::abs(g2 - 0.6) <= 0.15);
  }

  TEST_CASE("fractional mass exponent") {
    const auto p = probe(1.0, 0.25, 0.0);
    std::vector<std::pair<double, double>> data;
    for (int k = 0; k < 6; ++k) {
      const double s = std::ldexp(1.0, -k);
      data.emplace_back(s, condition_mass(p, s));
    }
    CHECK(std::isfinite(data.front().second));
    CHECK(std::abs(oracle::ols_loglog(data).slope - 0.5) <= 0.15);
  }

  TEST_CASE("audit rescales slopes by 2/q") {
    auto p = probe(2.0, 0.0, 0.0, 2.0);
    p.time_pairs = dyadic_time_pairs(0.5, 3, 7);
    const auto rep = audit_conditions(p);
    std::vector<std::pair<double, double>> inc;
    for (const auto& r : rep.rows) inc.emplace_back(r.pair.t - r.pair.s, r.increment);
    CHECK(rep.gamma1.slope == doctest::Approx(oracle::ols_loglog(inc).slope).epsilon(1e-12));
    CHECK(rep.predicted_gamma == 1.0);

    auto p4 = p;
    p4.power = 4.0;
    const auto rep4 = audit_conditions(p4);
    std::vector<std::pair<double, double>> tail;
    for (const auto& r : rep4.rows) tail.emplace_back(r.pair.t - r.pair.s, r.tail);
    CHECK(rep4.gamma2.slope == doctest::Approx(0.5 * oracle::ols_loglog(tail).slope).epsilon(1e-12));
  }

  TEST_CASE("dyadic pairs") {
    const auto pairs = dyadic_time_pairs(0.5, 2, 5);
    REQUIRE(pairs.size() == 4);
    for (const auto& p : pairs) CHECK(p.s == 0.5);
    std::vector<double> lags;
    for (const auto& p : pairs) lags.push_back(p.t - p.s);
    std::sort(lags.begin(), lags.end());
    CHECK(lags == std::vector<double>{0.03125, 0.0625, 0.125, 0.25});
  }

  TEST_CASE("spatial integral agrees with the lattice cross-check") {
    const KernelSpec k{2.0, 0.0, 1};
    const auto grid = SpectralGrid::for_kernel(k, 0.05, 1.0);
    const double free = increment_spatial_integral(k, 0.3, 0.1, 0.05);
    const double lattice = increment_spatial_integral_lattice(k, grid, 0.3, 0.1, 0.05);
    CHECK(lattice == doctest::Approx(free).epsilon(0.01));
    CHECK(weighted_kernel_mass(k, 0.0, 0.3) == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("fit_exponent on exact and perturbed power laws") {
    std::vector<std::pair<double, double>> exact, pref, pert;
    for (int k = 3; k <= 7; ++k) {
      const double x = std::ldexp(1.0, -k);
      exact.emplace_back(x, x);
      pref.emplace_back(x, 5.0 * std::pow(2.0, -0.5 * k));
      pert.emplace_back(x, x * (1.0 + 0.01 * (k % 2 ? -1.0 : 1.0)));
    }
    const auto a = fit_exponent(exact);
    CHECK(a.slope == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(a.stderr == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    const auto b = fit_exponent(pref);
    CHECK(b.slope == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(b.intercept == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    const auto c = fit_exponent(pert);
    CHECK(c.slope == doctest::Approx(oracle::ols_loglog(pert).slope).epsilon(1e-12));
    CHECK(std::abs(c.slope - 1.0) < 0.02);
    CHECK(a.narrow_span);  // 4 points over ~1.2 decades
  }

  TEST_CASE("fit_exponent rejects degenerate input") {
    std::vector<std::pair<double, double>> three{{1, 1}, {2, 2}, {4, 4}};
    CHECK(code_of([&] { fit_exponent(three); }) == ErrorCode::InsufficientPoints);
    std::vector<std::pair<double, double>> zero{{1, 1}, {2, 0}, {4, 4}, {8, 8}};
    CHECK(code_of([&] { fit_exponent(zero); }) == ErrorCode::NonPositiveData);
  }

  TEST_CASE("probe validation") {
    auto p = probe(1.0, 0.25, 0.0, 4.0);  // q eps = alpha
    p.time_pairs = dyadic_time_pairs(0.5, 2, 5);
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::MomentDivergence);
    auto q = probe(1.0, 0.5, 0.0);  // 2 eps = alpha
    q.time_pairs = p.time_pairs;
    CHECK(code_of([&] { q.validate(); }) == ErrorCode::InvalidArgument);
    auto r = probe(2.0, 0.0, 1.0);
    r.time_pairs = p.time_pairs;
    CHECK(code_of([&] { r.validate(); }) == ErrorCode::InvalidArgument);
    auto s = probe(2.0, 0.0, 0.0);
    s.time_pairs = {{0.5, 1.5}};  // t > T
    CHECK(code_of([&] { s.validate(); }) == ErrorCode::InvalidArgument);
  }
}
