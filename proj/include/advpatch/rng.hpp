#pragma once

#include <cstdint>
#include <random>

namespace advpatch {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of an independent stream derived from `parent` and `key`.
std::uint64_t child_seed(std::uint64_t parent, std::uint64_t key);

/// Key for a real-valued stream label (e.g. an evaluation scale).
std::uint64_t real_key(double value);

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace advpatch
