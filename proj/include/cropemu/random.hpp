#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cropemu {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream label
// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) using the top 53 bits; identical across
// standard library implementations, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on uniform01, for the same portability
// reason.
double standard_normal(Rng& rng);

// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace cropemu
