#pragma once

#include <cstdint>
#include <random>

namespace pidfuse {

// All randomness flows through this engine type, seeded explicitly.
using Rng = std::mt19937_64;

// Derives an independent stream seed for sub-task `index` of `seed`
// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace pidfuse
