#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "stochlab/convolution.hpp"
#include "stochlab/kernels.hpp"
#include "stochlab/noise.hpp"

namespace stochlab {

using Json = nlohmann::ordered_json;

/// ConfigError if j is not an object or carries a key outside `allowed`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const KernelSpec& spec);
Json to_json(const SpectralGrid& grid);
Json to_json(const JumpSpec& jump);
Json to_json(const NoiseSpec& noise);
Json to_json(const TestFunctionSpec& g);
Json to_json(const WindowSpec& window);

/// Strict parsers: absent keys keep their defaults, unknown keys throw ConfigError.
KernelSpec kernel_from_json(const Json& j);
SpectralGrid grid_from_json(const Json& j, int dim);
JumpSpec jump_from_json(const Json& j);
NoiseSpec noise_from_json(const Json& j);
TestFunctionSpec test_function_from_json(const Json& j);
WindowSpec window_from_json(const Json& j);

}  // namespace stochlab
