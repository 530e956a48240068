#include "stochlab/noise.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <ostream>

#include "stochlab/error.hpp"
#include "stochlab/rng.hpp"

namespace stochlab {

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

constexpr double kRelTol = 1e-6;

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  double magnitude = 0.0;  ///< integral of |f|, the scale for the relative test
};

/// Adaptive integral of f over the mark support, split at z = 0.
template <class F>
Estimate integrate_marks(const JumpSpec& jump, F&& f) {
  Estimate e;
  auto half = [&](double a, double b) {
    double err = 0.0, l1 = 0.0;
    const double v = Kronrod::integrate(f, a, b, 15, 1e-10, &err, &l1);
    e.value += v;
    e.error += err;
    e.magnitude += l1;
  };
  if (jump.family == MarkFamily::TwoSidedExponential) {
    const double inf = std::numeric_limits<double>::infinity();
    half(-inf, 0.0);
    half(0.0, inf);
  } else {
    half(-1.0, -jump.cutoff);
    half(jump.cutoff, 1.0);
  }
  return e;
}

void check_estimate(const Estimate& e, const char* what) {
  const bool ok = std::isfinite(e.value) && std::isfinite(e.error) &&
                  e.error <= kRelTol * std::max(std::abs(e.value), e.magnitude) + 1e-300;
  require(ok, ErrorCode::CompensatorQuadratureFailure,
          std::string(what) + ": quadrature error " + std::to_string(e.error) +
              " above the 1e-6 relative target");
}

}  // namespace

void JumpSpec::validate() const {
  if (family == MarkFamily::TwoSidedExponential) {
    require(rate > 0.0, ErrorCode::InvalidArgument, "mark rate must be positive");
    require(lambda > 0.0, ErrorCode::InvalidArgument, "jump intensity must be positive");
  } else {
    require(scale > 0.0, ErrorCode::InvalidArgument, "power-law scale must be positive");
    require(index > 0.0 && index < 2.0, ErrorCode::InvalidArgument,
            "power-law index must lie in (0, 2)");
    require(cutoff > 0.0 && cutoff < 1.0, ErrorCode::InvalidArgument,
            "small-jump cutoff must lie in (0, 1)");
  }
}

double JumpSpec::intensity() const {
  if (family == MarkFamily::TwoSidedExponential) return lambda;
  return 2.0 * scale * (std::pow(cutoff, -index) - 1.0) / index;
}

double JumpSpec::density(double z) const {
  const double r = std::abs(z);
  if (family == MarkFamily::TwoSidedExponential) return 0.5 * rate * std::exp(-rate * r);
  if (r <= cutoff || r > 1.0) return 0.0;
  return scale * std::pow(r, -1.0 - index) / intensity();
}

double JumpSpec::absolute_moment(double p) const {
  if (family == MarkFamily::TwoSidedExponential) return std::tgamma(p + 1.0) / std::pow(rate, p);
  const double e = p - index;
  const double radial = std::abs(e) < 1e-14 ? -std::log(cutoff) : (1.0 - std::pow(cutoff, e)) / e;
  return 2.0 * scale * radial / intensity();
}

double JumpSpec::truncated_variance() const {
  if (family == MarkFamily::TwoSidedExponential) return 0.0;
  return 2.0 * scale * std::pow(cutoff, 2.0 - index) / (2.0 - index);
}

double JumpSpec::sample_mark(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r;
  if (family == MarkFamily::TwoSidedExponential) {
    r = std::exponential_distribution<double>(rate)(rng);
  } else {
    // Inverse CDF of |z| on (cutoff, 1].
    const double top = std::pow(cutoff, -index);
    r = std::pow(top - unif(rng) * (top - 1.0), -1.0 / index);
  }
  return unif(rng) < 0.5 ? -r : r;
}

void NoiseSpec::validate() const {
  require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  require(steps >= 2, ErrorCode::InvalidArgument, "need at least 2 time steps");
  if (kind == NoiseKind::CompensatedPoisson) {
    require(jump.has_value(), ErrorCode::InvalidArgument, "Poisson noise needs a jump spec");
    jump->validate();
    require(p0 > 2.0, ErrorCode::InvalidArgument, "p0 must exceed 2");
    require(std::isfinite(jump->absolute_moment(p0)), ErrorCode::InvalidArgument,
            "mark law lacks a finite p0-th moment");
  }
}

NoisePath sample_path(const NoiseSpec& spec, std::uint64_t stream) {
  spec.validate();
  NoisePath path;
  path.kind = spec.kind;
  path.horizon = spec.horizon;
  path.steps = spec.steps;
  auto rng = stream_rng(spec.seed, stream);
  if (spec.kind == NoiseKind::Brownian) {
    std::normal_distribution<double> normal(0.0, std::sqrt(spec.dt()));
    path.increments.resize(spec.steps);
    for (double& w : path.increments) w = normal(rng);
    return path;
  }
  path.jump = spec.jump;
  std::exponential_distribution<double> wait(spec.jump->intensity());
  for (double t = wait(rng); t <= spec.horizon; t += wait(rng))
    path.events.push_back({t, spec.jump->sample_mark(rng)});
  return path;
}

double compensator_rate(const JumpSpec& jump, const std::function<double(double)>& h) {
  const Estimate e = integrate_marks(jump, [&](double z) { return h(z) * jump.density(z); });
  check_estimate(e, "mark integral");
  return jump.intensity() * e.value;
}

double compensator(const JumpSpec& jump, const MarkTimeFunction& h, double horizon) {
  double inner_error = 0.0, inner_magnitude = 0.0;
  auto rate = [&](double t) {
    const Estimate e =
        integrate_marks(jump, [&](double z) { return h(t, z) * jump.density(z); });
    check_estimate(e, "mark integral");
    inner_error = std::max(inner_error, e.error);
    inner_magnitude = std::max(inner_magnitude, e.magnitude);
    return e.value;
  };
  double err = 0.0, l1 = 0.0;
  const double value = Kronrod::integrate(rate, 0.0, horizon, 12, 1e-10, &err, &l1);
  // Odd integrands cancel in z, so the scale is the mark-level L1 norm, not |value|.
  check_estimate({value, err + inner_error * horizon, std::max(l1, inner_magnitude * horizon)},
                 "time integral");
  return jump.intensity() * value;
}

double compensated_integral(const NoisePath& path, const MarkTimeFunction& h) {
  require(path.kind == NoiseKind::CompensatedPoisson && path.jump.has_value(),
          ErrorCode::InvalidArgument, "compensated integral needs a Poisson path");
  double jumps = 0.0;
  for (const auto& e : path.events) jumps += h(e.time, e.mark);
  return jumps - compensator(*path.jump, h, path.horizon);
}

double ito_integral(const NoisePath& path, const std::function<double(double)>& h) {
  require(path.kind == NoiseKind::Brownian, ErrorCode::InvalidArgument,
          "Ito integral needs a Brownian path");
  double sum = 0.0;
  for (int i = 0; i < path.steps; ++i) sum += h(i * path.dt()) * path.increments[i];
  return sum;
}

double compensated_supremum(const NoisePath& path, const MarkTimeFunction& h) {
  require(path.kind == NoiseKind::CompensatedPoisson && path.jump.has_value(),
          ErrorCode::InvalidArgument, "supremum needs a Poisson path");
  using Gauss = boost::math::quadrature::gauss<double, 5>;
  const double dt = path.dt();
  // Cumulative compensator at the step nodes.
  std::vector<double> comp(path.steps + 1, 0.0);
  for (int i = 0; i < path.steps; ++i) {
    const double step = Gauss::integrate(
        [&](double t) {
          return compensator_rate(*path.jump, [&](double z) { return h(t, z); });
        },
        i * dt, (i + 1) * dt);
    comp[i + 1] = comp[i] + step;
  }
  auto comp_at = [&](double t) {
    const int i = std::min(static_cast<int>(t / dt), path.steps - 1);
    const double w = t / dt - i;
    return comp[i] + w * (comp[i + 1] - comp[i]);
  };

  double sup = 0.0;
  double jumps = 0.0;
  std::size_t k = 0;
  for (int i = 0; i <= path.steps; ++i) {
    const double node = i * dt;
    for (; k < path.events.size() && path.events[k].time <= node; ++k) {
      const double c = comp_at(path.events[k].time);
      sup = std::max(sup, std::abs(jumps - c));
      jumps += h(path.events[k].time, path.events[k].mark);
      sup = std::max(sup, std::abs(jumps - c));
    }
    sup = std::max(sup, std::abs(jumps - comp[i]));
  }
  return sup;
}

double kunita_rhs(const JumpSpec& jump, const MarkTimeFunction& h, double horizon, double p) {
  const double square =
      compensator(jump, [&](double t, double z) { return h(t, z) * h(t, z); }, horizon);
  const double power =
      compensator(jump, [&](double t, double z) { return std::pow(std::abs(h(t, z)), p); },
                  horizon);
  return std::pow(square, 0.5 * p) + power;
}

void write_path_csv(std::ostream& out, const NoisePath& path) {
  out.precision(17);
  if (path.kind == NoiseKind::Brownian) {
    out << "t,increment\n";
    for (int i = 0; i < path.steps; ++i) out << i * path.dt() << ',' << path.increments[i] << '\n';
  } else {
    out << "time,mark\n";
    for (const auto& e : path.events) out << e.time << ',' << e.mark << '\n';
  }
}

}  // namespace stochlab
