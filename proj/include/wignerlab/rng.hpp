#pragma once

// Seed derivation for reproducible parallel streams. Each (seed, a, b) triple
// maps to an independent mt19937_64 state, so results depend only on the task
// decomposition, never on which thread ran a task.

#include <cstdint>
#include <random>

namespace wignerlab::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL + 1));
}

using Engine = std::mt19937_64;

inline Engine stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  const std::uint64_t s = derive(seed, a, b);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return Engine(seq);
}

/// Uniform in the open interval (0, 1).
inline double uniform_open(Engine& eng) {
  for (;;) {
    const double u = std::generate_canonical<double, 53>(eng);
    if (u > 0.0) return u;
  }
}

}  // namespace wignerlab::rng
