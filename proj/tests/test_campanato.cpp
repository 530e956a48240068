#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles/oracles.hpp"
#include "stochlab/campanato.hpp"
#include "stochlab/error.hpp"

using namespace stochlab;

namespace {

DomainSpec box(double t0, double t1, std::vector<double> lo, std::vector<double> hi) {
  DomainSpec d;
  d.boxes.push_back({t0, t1, std::move(lo), std::move(hi)});
  return d;
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

SeminormOptions options(std::vector<double> radii, int budget, std::uint64_t seed = 1) {
  SeminormOptions o;
  o.radii = std::move(radii);
  o.budget = budget;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_SUITE("campanato") {
  TEST_CASE("parabolic distance") {
    CHECK(parabolic_distance({0.0, {0.0}}, {0.25, {0.1}}) == 0.5);
    CHECK(parabolic_distance({0.0, {0.0}}, {0.01, {0.3}}) == doctest::Approx(0.3));
    CHECK(parabolic_distance({1.0, {0.0, 0.0}}, {1.0, {3.0, 4.0}}) == doctest::Approx(5.0));
    CHECK(code_of([] { parabolic_distance({0.0, {0.0}}, {0.0, {0.0, 1.0}}); }) ==
          ErrorCode::DimensionMismatch);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto point = [&] { return SpaceTimePoint{u(rng), {u(rng), u(rng)}}; };
    for (int i = 0; i < 500; ++i) {
      const auto a = point(), b = point(), c = point();
      CHECK(parabolic_distance(a, a) == 0.0);
      CHECK(parabolic_distance(a, b) == parabolic_distance(b, a));
      CHECK(parabolic_distance(a, c) <= parabolic_distance(a, b) + parabolic_distance(b, c) + 1e-15);
    }
  }

  TEST_CASE("cylinder measure") {
    const ParabolicCylinder q1{{0.0, {0.0}}, 0.5};
    CHECK(q1.measure() == doctest::Approx(4.0 * 0.125).epsilon(1e-15));
    const ParabolicCylinder q2{{0.0, {0.0, 0.0}}, 0.5};
    CHECK(q2.measure() == doctest::Approx(2.0 * std::numbers::pi * 0.0625).epsilon(1e-15));
    CHECK(q1.contains({0.24, {0.49}}));
    CHECK_FALSE(q1.contains({0.26, {0.0}}));
  }

  TEST_CASE("A-type constant") {
    const auto unit = box(0.0, 1.0, {0.0}, {1.0});
    CHECK(a_type_constant(unit, {{0.5, {0.5}}}, {0.25}) == 1.0);
    // Corner center: half the time interval and half the ball remain.
    CHECK(std::abs(a_type_constant(unit, {{0.0, {0.0}}}, {0.25}) - 0.25) <= 1e-12);
    const auto square = box(0.0, 1.0, {0.0, 0.0}, {1.0, 1.0});
    CHECK(std::abs(a_type_constant(square, {{0.0, {0.0, 0.0}}}, {0.25}) - 0.125) <= 1e-12);
    const double a = a_type_constant(unit, {{0.3, {0.1}}, {0.9, {0.7}}, {0.5, {0.5}}},
                                     {0.1, 0.3, 0.6});
    CHECK(a > 0.0);
    CHECK(a <= 1.0);
    CHECK(code_of([&] { a_type_constant(unit, {{0.5, {0.5}}}, {2.0}); }) ==
          ErrorCode::RadiusExceedsDiameter);
  }

  TEST_CASE("disk and rectangle overlap against a fine grid") {
    struct Case {
      double cx, cy, c, x0, x1, y0, y1;
    };
    for (const Case& k : {Case{0.0, 0.0, 1.0, -2, 2, -2, 2}, Case{0.0, 0.0, 1.0, 0, 2, 0, 2},
                          Case{0.3, -0.2, 0.7, -0.1, 0.5, 0.0, 1.0},
                          Case{0.5, 0.5, 0.4, 0.0, 1.0, 0.0, 1.0},
                          Case{1.2, 0.1, 0.5, 0.0, 1.0, 0.0, 1.0}, Case{0.0, 0.0, 1.0, 2, 3, 2, 3}}) {
      const int N = 2000;
      double grid = 0.0;
      const double hx = (k.x1 - k.x0) / N, hy = (k.y1 - k.y0) / N;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          const double x = k.x0 + (i + 0.5) * hx - k.cx, y = k.y0 + (j + 0.5) * hy - k.cy;
          if (x * x + y * y <= k.c * k.c) grid += hx * hy;
        }
      const double exact = disk_rectangle_area(k.cx, k.cy, k.c, k.x0, k.x1, k.y0, k.y1);
      CHECK(std::abs(exact - grid) <= 2e-3 * std::max(grid, 1e-3));
    }
    CHECK(disk_rectangle_area(0, 0, 1, -2, 2, -2, 2) == doctest::Approx(std::numbers::pi));
  }

  TEST_CASE("inclusion-exclusion over overlapping boxes") {
    DomainSpec d;
    d.boxes.push_back({0.0, 1.0, {0.0}, {1.0}});
    d.boxes.push_back({0.5, 1.5, {0.5}, {2.0}});
    CHECK(d.measure() == doctest::Approx(1.0 + 1.5 - 0.25).epsilon(1e-15));
    const ParabolicCylinder q{{0.75, {0.75}}, 0.5};
    // (0.5, 1.0) x (0.25, 1.25): first box (0.5,1)x(0.25,1), second (0.5,1)x(0.5,1.25), shared (0.5,1)x(0.5,1).
    CHECK(d.intersection_measure(q) ==
          doctest::Approx(0.5 * 0.75 + 0.5 * 0.75 - 0.5 * 0.5).epsilon(1e-14));
    CHECK(d.diameter() == doctest::Approx(2.0));
  }

  TEST_CASE("constant field has zero seminorm") {
    const auto d = box(0.0, 1.0, {0.0}, {1.0});
    const auto r = campanato_seminorm([](const SpaceTimePoint&) { return 3.0; }, d, 2.0, 1.2,
                                      options({0.1, 0.2}, 64));
    CHECK(r.sup == 0.0);
    for (const auto& row : r.rows) CHECK(row.pair_average == 0.0);
    const auto h = holder_seminorm([](const SpaceTimePoint&) { return 3.0; }, d, 0.5,
                                   options({0.1, 0.2}, 64));
    CHECK(h.sup == 0.0);
  }

  TEST_CASE("pair average of u = x against a grid double sum") {
    const auto d = box(0.0, 1.0, {0.0}, {1.0});
    auto u = [](const SpaceTimePoint& p) { return p.x[0]; };
    for (auto [center, radius] : {std::pair{SpaceTimePoint{0.5, {0.5}}, 0.25},
                                  {SpaceTimePoint{0.0, {0.0}}, 0.5},
                                  {SpaceTimePoint{0.9, {0.6}}, 0.4}}) {
      auto o = options({radius}, 4096, 7);
      o.explicit_centers = {center};
      const auto r = campanato_seminorm(u, d, 2.0, 1.0, o);
      const ParabolicCylinder q{center, radius};
      const double c2 = radius * radius;
      const double ref = oracle::grid_pair_average(
          [](double, double x) { return x; },
          [&](double t, double x) { return q.contains({t, {x}}) && d.contains({t, {x}}); },
          center.t - c2, center.t + c2, center.x[0] - radius, center.x[0] + radius, 200, 2.0);
      CHECK(std::abs(r.rows[0].pair_average / ref - 1.0) <= 0.05);
      // theta = 1 leaves the pair average unscaled.
      CHECK(r.rows[0].value == doctest::Approx(r.rows[0].pair_average).epsilon(1e-14));
    }
  }

  TEST_CASE("pairwise form dominates the mean deviation") {
    const auto d = box(0.0, 1.0, {-1.0, -1.0}, {1.0, 1.0});
    auto u = [](const SpaceTimePoint& p) { return std::sin(4.0 * p.x[0]) + p.t * p.x[1]; };
    for (double p : {1.0, 2.0, 3.0}) {
      const auto r = campanato_seminorm(u, d, p, 1.1, options({0.1, 0.3, 0.6}, 128));
      CHECK(r.pairwise_dominates);
      for (const auto& row : r.rows) CHECK(row.value >= row.mean_deviation);
    }
  }

  TEST_CASE("seminorm scales as a^p") {
    const auto d = box(0.0, 1.0, {0.0}, {1.0});
    auto u = [](const SpaceTimePoint& p) { return std::sqrt(p.t) + p.x[0] * p.x[0]; };
    auto v = [&](const SpaceTimePoint& p) { return 2.0 * u(p); };
    const auto o = options({0.1, 0.2, 0.4}, 96, 5);
    const auto a = campanato_seminorm(u, d, 2.0, 1.2, o);
    const auto b = campanato_seminorm(v, d, 2.0, 1.2, o);
    CHECK(b.sup == doctest::Approx(4.0 * a.sup).epsilon(1e-12));
    for (std::size_t k = 0; k < a.rows.size(); ++k)
      CHECK(b.rows[k].pair_average == doctest::Approx(4.0 * a.rows[k].pair_average).epsilon(1e-12));
  }

  TEST_CASE("Holder seminorm") {
    const auto d = box(0.0, 1.0, {0.0}, {1.0});
    const auto o = options({0.05, 0.1, 0.2, 0.4}, 128, 3);
    const auto lin = holder_seminorm([](const SpaceTimePoint& p) { return p.x[0]; }, d, 1.0, o);
    REQUIRE(lin.fitted);
    CHECK(std::abs(lin.fitted_exponent - 1.0) <= 0.02);
    CHECK(lin.sup <= 1.0 + 1e-12);
    const auto root = holder_seminorm([](const SpaceTimePoint& p) { return std::sqrt(p.t); }, d,
                                      1.0, o);
    CHECK(root.sup <= 1.0 + 1e-12);
    CHECK(root.sup > 0.5);
    const auto steep = holder_seminorm([](const SpaceTimePoint& p) { return p.x[0]; }, d, 1.5, o);
    CHECK_FALSE(steep.warning.empty());
  }

  TEST_CASE("embedding exponent and Campanato order") {
    CHECK(embedding_exponent(2.0, 1.25, 1) == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(embedding_exponent(2.0, 1.5, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(embedding_exponent(4.0, campanato_order(4.0, 0.3, 1), 1) ==
          doctest::Approx(0.3).epsilon(1e-14));
    CHECK(code_of([] { embedding_exponent(2.0, 1.0, 1); }) == ErrorCode::ThetaOutOfEmbeddingRange);
    CHECK(code_of([] { embedding_exponent(2.0, 1.7, 1); }) == ErrorCode::ThetaOutOfEmbeddingRange);
    CHECK(code_of([] { embedding_exponent(0.5, 1.1, 1); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("inclusion criterion") {
    CHECK(inclusion_holds(2, 2, 2, 2));
    CHECK_FALSE(inclusion_holds(2, 3, 2, 2));
    CHECK(inclusion_holds(2, 2, 4, 4));
    CHECK_FALSE(inclusion_holds(4, 2, 2, 2));
    CHECK(inclusion_holds(2, 3, 4, 4));
    CHECK_FALSE(inclusion_holds(2, 3, 4, 3.9));
    CHECK_FALSE(inclusion_holds(1, 2.5, 3, 4));
    CHECK(inclusion_holds(1, 1.2, 3, 4));
    // Raising sigma or lowering theta keeps an inclusion.
    for (double sigma = 6.0; sigma < 10.0; sigma += 0.5) CHECK(inclusion_holds(2, 3, 4, sigma));
    for (double theta = 3.0; theta > 1.0; theta -= 0.25) CHECK(inclusion_holds(2, theta, 4, 6));
  }

  TEST_CASE("fitted Campanato order recovers the Holder exponent") {
    const double gamma = 0.5;
    const auto d = box(0.0, 1.0, {-1.0}, {1.0});
    auto u = [&](const SpaceTimePoint& p) {
      return std::pow(std::abs(p.x[0]), gamma) + std::pow(p.t, 0.5 * gamma);
    };
    auto o = options({0.03125, 0.0625, 0.125, 0.25, 0.5}, 512, 11);
    o.explicit_centers = {{0.0, {0.0}}};
    const auto r = campanato_seminorm(u, d, 2.0, campanato_order(2.0, gamma, 1), o);
    REQUIRE(r.fitted);
    CHECK(std::abs(3.0 * (r.fitted_exponent - 1.0) / 2.0 - gamma) <= 0.15);
  }

  TEST_CASE("stochastic form from a moment field") {
    // Pair averages proportional to |Q|^{theta0 - 1} give theta_hat = theta0 exactly.
    const double theta0 = 1.2;
    MomentField f;
    f.p = 2.0;
    f.realizations = 100;
    for (double r : {0.0625, 0.125, 0.25, 0.5}) f.cylinders.push_back({{0.5, {0.0}}, r});
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 3; ++k) {
        PointPair pr;
        pr.cylinder = c;
        f.pairs.push_back(pr);
        f.estimate.push_back(0.7 * std::pow(f.cylinders[c].measure(), theta0 - 1.0));
        f.stderr.push_back(0.01);
      }
    const auto r = campanato_seminorm(f, theta0);
    REQUIRE(r.fitted);
    CHECK(r.fitted_exponent == doctest::Approx(theta0).epsilon(1e-12));
    for (const auto& row : r.rows) CHECK(row.value == doctest::Approx(0.7).epsilon(1e-12));
    MomentField bare = f;
    bare.cylinders.clear();
    CHECK(code_of([&] { campanato_seminorm(bare, theta0); }) == ErrorCode::EmptyRequest);
  }

  TEST_CASE("errors") {
    const auto d = box(0.0, 1.0, {0.0}, {1.0});
    auto u = [](const SpaceTimePoint& p) { return p.t; };
    CHECK(code_of([&] { campanato_seminorm(u, d, 2.0, 1.2, options({0.1}, 32)); }) ==
          ErrorCode::SamplingBudgetTooSmall);
    CHECK(code_of([&] { campanato_seminorm(u, d, 2.0, 1.2, options({}, 64)); }) ==
          ErrorCode::EmptyRequest);
    DomainSpec mixed = d;
    mixed.boxes.push_back({0.0, 1.0, {0.0, 0.0}, {1.0, 1.0}});
    CHECK(code_of([&] { mixed.validate(); }) == ErrorCode::DimensionMismatch);
    CHECK(code_of([&] { DomainSpec{}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { d.intersection_measure({{0.5, {0.0, 0.0}}, 0.1}); }) ==
          ErrorCode::DimensionMismatch);
  }
}
