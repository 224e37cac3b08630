#pragma once

// Counter-based random streams. Every draw is a pure function of
// (master seed, purpose, particle, iteration, substep), so a run produces the
// same numbers no matter how particles are split across workers.

#include <cstdint>
#include <limits>
#include <random>

namespace mmfld {

// Stream protocol id recorded in the ensemble lineage. Bump when the key
// layout or the mixing function changes.
inline constexpr std::uint32_t kStreamProtocol = 1;

enum class StreamPurpose : std::uint64_t { initialization = 1, dynamics = 2, test = 3 };

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64 generator seeded from a hashed key; satisfies UniformRandomBitGenerator.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t particle, std::uint64_t iteration,
                std::uint64_t substep = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    h = splitmix64(h ^ particle);
    h = splitmix64(h ^ iteration);
    state_ = splitmix64(h ^ substep);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace mmfld
