#pragma once

#include <cstdint>
#include <random>

namespace latbma {

using RngStream = std::mt19937_64;

// Purposes for derived streams. Each (seed, replicate, purpose) triple owns
// an independent generator, so replicate r draws the same numbers no matter
// how many other replicates run or in which order.
enum class StreamPurpose : std::uint32_t {
  kCovariates = 1,
  kNoise = 2,
  kOutcome = 3,
  kChain = 4,
  kResample = 5,
};

inline RngStream make_stream(std::uint64_t seed, std::uint64_t replicate,
                             StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate & 0xffffffffu),
                    static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return RngStream(seq);
}

// Uniform double in [0, 1) built from the top 53 bits; unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(RngStream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace latbma
