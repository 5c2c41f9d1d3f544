#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cropemu::sampling {

inline constexpr std::size_t kMaxSobolDimension = 32;

// Unscrambled Sobol sequence with Joe-Kuo direction numbers, generated in
// Gray-code order (x_0 = 0). Single owner; distinct instances over disjoint
// index ranges can run in parallel.
class SobolSequence {
 public:
  // Throws ConfigError when dimension is outside [1, 32].
  explicit SobolSequence(std::size_t dimension, std::uint64_t skip = 0);

  std::size_t dimension() const { return dimension_; }
  // Sequence index of the point the next call to next() returns.
  std::uint64_t index() const { return index_; }

  std::vector<double> next();
  // Repositions so that next() yields the point at `index`.
  void seek(std::uint64_t index);

 private:
  std::size_t dimension_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, 32>> directions_;
  std::vector<std::uint32_t> state_;
};

// count points starting at sequence index skip.
std::vector<std::vector<double>> sobol_points(std::size_t dimension, std::size_t count,
                                              std::uint64_t skip = 0);

}  // namespace cropemu::sampling
