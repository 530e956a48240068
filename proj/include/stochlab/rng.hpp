#pragma once

#include <cstdint>
#include <random>

namespace stochlab {

/// Generator keyed by (seed, stream): a pure function of the pair, so streams can be
/// drawn in any order or in parallel.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace stochlab
