#include "stochlab/serialization.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "stochlab/error.hpp"

namespace stochlab {

namespace {

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, where + "." + key + ": " + e.what());
  }
}

template <class E, std::size_t N>
E enum_from(const Json& j, const char* key, E fallback,
            const std::array<std::pair<const char*, E>, N>& names, const std::string& where) {
  if (!j.contains(key)) return fallback;
  std::string text;
  read(j, key, text, where);
  for (const auto& [name, value] : names)
    if (text == name) return value;
  fail(ErrorCode::ConfigError, where + "." + key + ": unknown value '" + text + "'");
}

template <class E, std::size_t N>
const char* enum_name(E value, const std::array<std::pair<const char*, E>, N>& names) {
  for (const auto& [name, v] : names)
    if (v == value) return name;
  return "?";
}

constexpr std::array<std::pair<const char*, KernelMethod>, 2> kMethods{
    {{"spectral", KernelMethod::Spectral}, {"closed-form", KernelMethod::ClosedForm}}};
constexpr std::array<std::pair<const char*, NoiseKind>, 2> kKinds{
    {{"brownian", NoiseKind::Brownian}, {"poisson", NoiseKind::CompensatedPoisson}}};
constexpr std::array<std::pair<const char*, MarkFamily>, 2> kMarkFamilies{
    {{"two-sided-exponential", MarkFamily::TwoSidedExponential},
     {"truncated-power", MarkFamily::TruncatedPower}}};
constexpr std::array<std::pair<const char*, TestFamily>, 4> kTestFamilies{
    {{"parabolic-holder", TestFamily::ParabolicHolder},
     {"spatial-holder", TestFamily::SpatialHolder},
     {"constant", TestFamily::Constant},
     {"zero", TestFamily::Zero}}};
constexpr std::array<std::pair<const char*, MarkFactor>, 3> kMarkFactors{
    {{"identity", MarkFactor::Identity}, {"absolute", MarkFactor::Absolute},
     {"unit", MarkFactor::Unit}}};

}  // namespace

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::ConfigError, where + " must be an object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    require(known, ErrorCode::ConfigError, where + ": unknown key '" + item.key() + "'");
  }
}

Json to_json(const KernelSpec& spec) {
  return Json{{"alpha", spec.alpha},
              {"epsilon", spec.epsilon},
              {"dim", spec.dim},
              {"method", enum_name(spec.method, kMethods)}};
}

Json to_json(const SpectralGrid& grid) {
  return Json{{"half_width", grid.half_width()}, {"points", grid.points_per_axis()}};
}

Json to_json(const JumpSpec& jump) {
  Json j{{"family", enum_name(jump.family, kMarkFamilies)}};
  if (jump.family == MarkFamily::TwoSidedExponential) {
    j["rate"] = jump.rate;
    j["lambda"] = jump.lambda;
  } else {
    j["scale"] = jump.scale;
    j["index"] = jump.index;
    j["cutoff"] = jump.cutoff;
  }
  return j;
}

Json to_json(const NoiseSpec& noise) {
  Json j{{"kind", enum_name(noise.kind, kKinds)},
         {"horizon", noise.horizon},
         {"steps", noise.steps},
         {"seed", noise.seed}};
  if (noise.jump) {
    j["jump"] = to_json(*noise.jump);
    j["p0"] = noise.p0;
  }
  return j;
}

Json to_json(const TestFunctionSpec& g) {
  return Json{{"family", enum_name(g.family, kTestFamilies)},
              {"beta", g.beta},
              {"amplitude", g.amplitude},
              {"mark", enum_name(g.mark, kMarkFactors)}};
}

Json to_json(const WindowSpec& window) {
  return Json{{"half_width", window.half_width}, {"stride", window.stride}};
}

KernelSpec kernel_from_json(const Json& j) {
  check_keys(j, {"alpha", "epsilon", "dim", "method"}, "kernel");
  KernelSpec spec;
  read(j, "alpha", spec.alpha, "kernel");
  read(j, "epsilon", spec.epsilon, "kernel");
  read(j, "dim", spec.dim, "kernel");
  spec.method = enum_from(j, "method", spec.method, kMethods, "kernel");
  return spec;
}

SpectralGrid grid_from_json(const Json& j, int dim) {
  check_keys(j, {"half_width", "points"}, "grid");
  require(j.contains("half_width") && j.contains("points"), ErrorCode::ConfigError,
          "grid needs half_width and points");
  double half_width = 0.0;
  int points = 0;
  read(j, "half_width", half_width, "grid");
  read(j, "points", points, "grid");
  return SpectralGrid(half_width, points, dim);
}

JumpSpec jump_from_json(const Json& j) {
  check_keys(j, {"family", "rate", "lambda", "scale", "index", "cutoff"}, "jump");
  JumpSpec jump;
  jump.family = enum_from(j, "family", jump.family, kMarkFamilies, "jump");
  read(j, "rate", jump.rate, "jump");
  read(j, "lambda", jump.lambda, "jump");
  read(j, "scale", jump.scale, "jump");
  read(j, "index", jump.index, "jump");
  read(j, "cutoff", jump.cutoff, "jump");
  return jump;
}

NoiseSpec noise_from_json(const Json& j) {
  check_keys(j, {"kind", "horizon", "steps", "seed", "jump", "p0"}, "noise");
  NoiseSpec noise;
  noise.kind = enum_from(j, "kind", noise.kind, kKinds, "noise");
  read(j, "horizon", noise.horizon, "noise");
  read(j, "steps", noise.steps, "noise");
  read(j, "seed", noise.seed, "noise");
  read(j, "p0", noise.p0, "noise");
  if (j.contains("jump")) noise.jump = jump_from_json(j.at("jump"));
  if (noise.kind == NoiseKind::CompensatedPoisson && !noise.jump) noise.jump = JumpSpec{};
  return noise;
}

TestFunctionSpec test_function_from_json(const Json& j) {
  check_keys(j, {"family", "beta", "amplitude", "mark"}, "g");
  TestFunctionSpec g;
  g.family = enum_from(j, "family", g.family, kTestFamilies, "g");
  read(j, "beta", g.beta, "g");
  read(j, "amplitude", g.amplitude, "g");
  g.mark = enum_from(j, "mark", g.mark, kMarkFactors, "g");
  return g;
}

WindowSpec window_from_json(const Json& j) {
  check_keys(j, {"half_width", "stride"}, "window");
  WindowSpec w;
  read(j, "half_width", w.half_width, "window");
  read(j, "stride", w.stride, "window");
  return w;
}

}  // namespace stochlab
