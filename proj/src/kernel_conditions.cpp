#include "stochlab/kernel_conditions.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include "stochlab/error.hpp"

namespace stochlab {

namespace {

using Gauss20 = boost::math::quadrature::gauss<double, 20>;
using Gauss8 = boost::math::quadrature::gauss<double, 8>;

constexpr int kPanelsPerDecade = 16;
constexpr int kSignProbes = 6;
constexpr double kInnerFraction = 1e-6;

/// Algebraic tail sum_k c_k r^{-e_k}, truncated where its terms stop shrinking.
struct PowerTail {
  std::vector<double> coeff;
  std::vector<double> exponent;
};

/// int_R^inf (sum_k c_k r^{-e_k}) (1 + r^beta) r^{d-1} dr, taken in absolute value
/// (the leading term fixes the sign beyond R).
double tail_integral(const PowerTail& tail, double beta, int dim, double radius) {
  double total = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tail.coeff.size(); ++k) {
    if (tail.coeff[k] == 0.0) continue;
    const double e = tail.exponent[k] - dim;
    double term = tail.coeff[k] * std::pow(radius, -e) / e;
    if (beta > 0.0) term += tail.coeff[k] * std::pow(radius, beta - e) / (e - beta);
    const double size = std::abs(term);
    if (size > previous && k > 2) break;
    total += term;
    previous = size;
    if (size < 1e-17 * std::abs(total)) break;
  }
  return std::abs(total);
}

/// Surface-weighted int_0^inf |f(r)| w(r) r^{d-1} dr with w = 1 + r^beta.
/// f ~ const on [0, r_lo], log panels with sign-change splitting on [r_lo, r_hi],
/// algebraic tail beyond.
template <class F>
double radial_abs_integral(F&& f, double r_lo, double r_hi, const PowerTail& tail, double beta,
                           int dim) {
  // beta = 0 means no moment weight at all.
  auto weight = [&](double r) {
    return (beta > 0.0 ? 1.0 + std::pow(r, beta) : 1.0) * std::pow(r, dim - 1);
  };
  auto piece = [&](double a, double b) {
    return std::abs(Gauss20::integrate([&](double r) { return f(r) * weight(r); }, a, b));
  };

  double total = std::abs(f(r_lo)) * std::pow(r_lo, dim) / dim;
  if (beta > 0.0) total += std::abs(f(r_lo)) * std::pow(r_lo, dim + beta) / (dim + beta);

  const double decades = std::log10(r_hi / r_lo);
  const int panels = std::max(1, static_cast<int>(std::ceil(decades * kPanelsPerDecade)));
  const double ratio = std::pow(r_hi / r_lo, 1.0 / panels);
  double a = r_lo;
  double fa = f(a);
  for (int p = 0; p < panels; ++p) {
    const double b = p + 1 == panels ? r_hi : a * ratio;
    double left = a;
    double f_left = fa;
    for (int j = 1; j <= kSignProbes; ++j) {
      const double x = a + (b - a) * j / kSignProbes;
      const double fx = f(x);
      if ((f_left < 0.0) != (fx < 0.0) && f_left != 0.0 && fx != 0.0) {
        std::uintmax_t iterations = 60;
        const auto bracket = boost::math::tools::toms748_solve(
            f, left, x, f_left, fx, boost::math::tools::eps_tolerance<double>(48), iterations);
        const double root = 0.5 * (bracket.first + bracket.second);
        total += piece(a, root);
        a = root;
      }
      left = x;
      f_left = fx;
    }
    total += piece(a, b);
    a = b;
    fa = f_left;
  }
  total += tail_integral(tail, beta, dim, r_hi);
  return unit_sphere_area(dim) * total;
}

/// Smallest nonzero expansion term exponent eps + alpha k among the given coefficients.
double leading_decay(std::span<const double> coeffs, const KernelSpec& spec) {
  for (std::size_t k = 0; k < coeffs.size(); ++k)
    if (coeffs[k] != 0.0) return spec.epsilon + spec.alpha * static_cast<double>(k);
  return std::numeric_limits<double>::infinity();
}

struct UnitMasses {
  double plain = 0.0;   ///< int |P(rho)| d rho
  double moment = 0.0;  ///< int |P(rho)| |rho|^beta d rho
};

/// M0 and M_beta of the unit-time profile; cached per (alpha, eps, d, beta).
UnitMasses unit_masses(const KernelSpec& spec, double beta) {
  static std::mutex mutex;
  static std::map<std::tuple<double, double, int, double>, UnitMasses> cache;
  const auto key = std::make_tuple(spec.alpha, spec.epsilon, spec.dim, beta);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const auto profile = RadialProfile::cached(spec);
  PowerTail tail;
  const auto a = profile->tail_coefficients();
  for (std::size_t k = 0; k < a.size(); ++k) {
    tail.coeff.push_back(a[k]);
    tail.exponent.push_back(spec.dim + spec.epsilon + spec.alpha * static_cast<double>(k));
  }
  auto unit = [&](double rho) { return profile->unit(rho); };
  const double r_hi = 2.0 * profile->switch_radius();
  UnitMasses m;
  m.plain = radial_abs_integral(unit, 1e-8, r_hi, tail, 0.0, spec.dim);
  m.moment = beta == 0.0 ? m.plain
                         : radial_abs_integral(unit, 1e-8, r_hi, tail, beta, spec.dim) - m.plain;
  std::lock_guard lock(mutex);
  cache.emplace(key, m);
  return m;
}

void check_beta_moment(const KernelSpec& kernel, double beta) {
  if (beta == 0.0 && kernel.epsilon == 0.0) return;
  const auto profile = RadialProfile::cached(kernel);
  const double decay = leading_decay(profile->tail_coefficients(), kernel);
  require(decay > beta, ErrorCode::MomentDivergence,
          "the beta-moment of the kernel diverges: tail decays like |z|^{-d-" +
              std::to_string(decay) + "} with beta=" + std::to_string(beta));
}

void check_pair(const ConditionProbe& probe, double s, double t) {
  require(s > 0.0 && s < t, ErrorCode::InvalidArgument, "time pair needs 0 < s < t");
  require(t <= probe.horizon * (1.0 + 1e-12), ErrorCode::InvalidArgument,
          "time pair exceeds the horizon");
}

/// int_0^len f(tau) dtau on the graded mesh tau_j = len (j/J)^kappa, doubled until stable.
template <class F>
QuadratureResult graded_quadrature(F&& f, double len, int intervals, double grading) {
  auto level = [&](int J) {
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      const double a = len * std::pow(static_cast<double>(j) / J, grading);
      const double b = len * std::pow(static_cast<double>(j + 1) / J, grading);
      sum += Gauss8::integrate(f, a, b);
    }
    return sum;
  };
  QuadratureResult result;
  double coarse = level(intervals);
  const int max_intervals = 16 * intervals;
  for (int J = 2 * intervals;; J *= 2) {
    const double fine = level(J);
    result.value = fine;
    result.intervals = J;
    result.relative_change = fine == 0.0 ? 0.0 : std::abs(fine - coarse) / std::abs(fine);
    if (result.relative_change < 0.01 || J >= max_intervals) break;
    coarse = fine;
  }
  require(result.relative_change <= 0.05, ErrorCode::QuadratureNotConverged,
          "graded-mesh levels disagree by " + std::to_string(100.0 * result.relative_change) +
              "%");
  return result;
}

}  // namespace

void ConditionProbe::validate() const {
  kernel.validate();
  require(beta >= 0.0 && beta < 1.0, ErrorCode::InvalidArgument, "beta must lie in [0, 1)");
  require(power >= 1.0, ErrorCode::InvalidArgument, "power must be >= 1");
  require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  require(2.0 * kernel.epsilon < kernel.alpha, ErrorCode::InvalidArgument,
          "condition checks need eps < alpha/2");
  require(power * kernel.epsilon < kernel.alpha, ErrorCode::MomentDivergence,
          "time integral of the q-th power diverges for q*eps >= alpha");
  require(mesh_intervals >= 64, ErrorCode::InvalidArgument, "mesh needs at least 64 intervals");
  require(grading >= 1.0, ErrorCode::InvalidArgument, "grading exponent must be >= 1");
  for (const auto& pair : time_pairs) check_pair(*this, pair.s, pair.t);
  if (grid) {
    require(grid->dim() == kernel.dim, ErrorCode::GridMismatch,
            "kernel and grid dimensions differ");
  }
}

double weighted_kernel_mass(const KernelSpec& kernel, double beta, double t) {
  require(t > 0.0, ErrorCode::NonPositiveTime, "t must be positive");
  check_beta_moment(kernel, beta);
  const UnitMasses m = unit_masses(kernel, beta);
  // p(t, z) dz = t^{-eps/alpha} P(rho) d rho with |z| = t^{1/alpha} rho.
  const double scale = std::pow(t, -kernel.epsilon / kernel.alpha);
  if (beta == 0.0) return scale * m.plain;
  return scale * (m.plain + std::pow(t, beta / kernel.alpha) * m.moment);
}

double increment_spatial_integral(const KernelSpec& kernel, double beta, double tau,
                                  double delta) {
  require(tau > 0.0 && delta > 0.0, ErrorCode::NonPositiveTime, "tau and delta must be positive");
  const auto profile = RadialProfile::cached(kernel);
  const double late = tau + delta;
  auto f = [&](double r) { return (*profile)(late, r) - (*profile)(tau, r); };

  PowerTail tail;
  const auto a = profile->tail_coefficients();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double c = a[k] * (std::pow(late, static_cast<double>(k)) -
                             std::pow(tau, static_cast<double>(k)));
    tail.coeff.push_back(c);
    tail.exponent.push_back(kernel.dim + kernel.epsilon + kernel.alpha * static_cast<double>(k));
  }
  const double r_lo = kInnerFraction * std::pow(tau, 1.0 / kernel.alpha);
  const double r_hi = 2.0 * profile->switch_radius() * std::pow(late, 1.0 / kernel.alpha);
  return radial_abs_integral(f, r_lo, r_hi, tail, beta, kernel.dim);
}

double increment_spatial_integral_lattice(const KernelSpec& kernel, const SpectralGrid& grid,
                                          double beta, double tau, double delta) {
  const auto late = eval_kernel(kernel, grid, tau + delta);
  const auto early = eval_kernel(kernel, grid, tau);
  const int n = grid.points_per_axis();
  double sum = 0.0;
  for (std::size_t i = 0; i < late.size(); ++i) {
    const double x0 = grid.coordinate(static_cast<int>(i % n));
    const double x1 = grid.dim() == 1 ? 0.0 : grid.coordinate(static_cast<int>(i / n));
    const double r = std::hypot(x0, x1);
    sum += std::abs(late[i] - early[i]) * (1.0 + std::pow(r, beta));
  }
  return sum * grid.cell_volume();
}

QuadratureResult condition_increment_detailed(const ConditionProbe& probe, double s, double t) {
  probe.validate();
  check_pair(probe, s, t);
  const double delta = t - s;
  auto integrand = [&](double tau) {
    if (tau <= 0.0) return 0.0;
    return std::pow(increment_spatial_integral(probe.kernel, probe.beta, tau, delta), probe.power);
  };
  return graded_quadrature(integrand, s, probe.mesh_intervals, probe.grading);
}

QuadratureResult condition_mass_detailed(const ConditionProbe& probe, double s) {
  probe.validate();
  require(s > 0.0 && s <= probe.horizon * (1.0 + 1e-12), ErrorCode::InvalidArgument,
          "s must lie in (0, T]");
  auto integrand = [&](double tau) {
    if (tau <= 0.0) return 0.0;
    return std::pow(weighted_kernel_mass(probe.kernel, 0.0, tau), probe.power);
  };
  return graded_quadrature(integrand, s, probe.mesh_intervals, probe.grading);
}

QuadratureResult condition_tail_detailed(const ConditionProbe& probe, double s, double t) {
  probe.validate();
  check_pair(probe, s, t);
  check_beta_moment(probe.kernel, probe.beta);
  auto integrand = [&](double tau) {
    if (tau <= 0.0) return 0.0;
    return std::pow(weighted_kernel_mass(probe.kernel, probe.beta, tau), probe.power);
  };
  return graded_quadrature(integrand, t - s, probe.mesh_intervals, probe.grading);
}

double condition_increment(const ConditionProbe& probe, double s, double t) {
  return condition_increment_detailed(probe, s, t).value;
}
double condition_mass(const ConditionProbe& probe, double s) {
  return condition_mass_detailed(probe, s).value;
}
double condition_tail(const ConditionProbe& probe, double s, double t) {
  return condition_tail_detailed(probe, s, t).value;
}

PowerFit fit_exponent(std::span<const std::pair<double, double>> pairs) {
  require(pairs.size() >= 4, ErrorCode::InsufficientPoints, "need at least 4 (scale, value) pairs");
  double min_v = std::numeric_limits<double>::infinity();
  double max_v = 0.0;
  double mx = 0.0, my = 0.0;
  for (const auto& [scale, value] : pairs) {
    require(scale > 0.0 && value > 0.0 && std::isfinite(scale) && std::isfinite(value),
            ErrorCode::NonPositiveData, "fit data must be positive and finite");
    mx += std::log(scale);
    my += std::log(value);
    min_v = std::min(min_v, value);
    max_v = std::max(max_v, value);
  }
  const double n = static_cast<double>(pairs.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [scale, value] : pairs) {
    const double dx = std::log(scale) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(value) - my);
  }
  require(sxx > 0.0, ErrorCode::InsufficientPoints, "scales must not all coincide");
  PowerFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (const auto& [scale, value] : pairs) {
    const double r = std::log(value) - fit.intercept - fit.slope * std::log(scale);
    ssr += r * r;
  }
  fit.stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  fit.points = pairs.size();
  fit.value_decades = std::log10(max_v / min_v);
  fit.narrow_span = fit.value_decades < 1.5;
  return fit;
}

std::vector<TimePair> dyadic_time_pairs(double s, int k_min, int k_max) {
  require(k_min <= k_max, ErrorCode::InvalidArgument, "k_min must not exceed k_max");
  std::vector<TimePair> pairs;
  for (int k = k_max; k >= k_min; --k) pairs.push_back({s, s + std::ldexp(1.0, -k)});
  return pairs;
}

ConditionReport audit_conditions(const ConditionProbe& probe) {
  probe.validate();
  check_beta_moment(probe.kernel, probe.beta);
  // Build shared tables before the parallel region.
  RadialProfile::cached(probe.kernel);
  unit_masses(probe.kernel, 0.0);
  unit_masses(probe.kernel, probe.beta);

  ConditionReport report;
  report.probe = probe;
  report.rows.resize(probe.time_pairs.size());
  const auto count = static_cast<long>(probe.time_pairs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      const TimePair pair = probe.time_pairs[i];
      ConditionRow row{pair, condition_increment(probe, pair.s, pair.t),
                       condition_mass(probe, pair.s), condition_tail(probe, pair.s, pair.t)};
      report.rows[i] = row;
    } catch (...) {
#pragma omp critical(stochlab_audit_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::pair<double, double>> inc, tail;
  for (const auto& row : report.rows) {
    inc.emplace_back(row.pair.t - row.pair.s, row.increment);
    tail.emplace_back(row.pair.t - row.pair.s, row.tail);
    report.n0_estimate = std::max(report.n0_estimate, row.mass);
  }
  // LHS ~ (t-s)^{gamma q/2}; report gamma itself.
  const double to_gamma = 2.0 / probe.power;
  if (inc.size() >= 4) {
    report.gamma1 = fit_exponent(inc);
    report.gamma2 = fit_exponent(tail);
    for (PowerFit* fit : {&report.gamma1, &report.gamma2}) {
      fit->slope *= to_gamma;
      fit->stderr *= to_gamma;
    }
  }
  report.predicted_gamma = (probe.kernel.alpha - 2.0 * probe.kernel.epsilon) / probe.kernel.alpha;
  return report;
}

}  // namespace stochlab
