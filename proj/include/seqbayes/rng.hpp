#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqbayes {

/// Identifier written into run reports so other implementations can reproduce streams.
inline constexpr std::string_view kRngName = "mt19937_64/seed_seq(seed_lo,seed_hi,stream_lo,stream_hi)";

using Engine = std::mt19937_64;

/// Independent deterministic substream `stream` of the master `seed`.
inline Engine make_stream(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Engine(seq);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Engine& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace seqbayes
