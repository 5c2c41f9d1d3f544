#include "cropemu/sampling/sobol.hpp"

#include <string>

#include "cropemu/error.hpp"

namespace cropemu::sampling {
namespace {

struct Primitive {
  unsigned degree;
  std::uint32_t coeffs;  // interior polynomial coefficients a
  std::array<std::uint32_t, 7> m;
};

// Joe-Kuo (new-joe-kuo-6.21201) parameters for dimensions 2..32.
constexpr std::array<Primitive, 31> kPrimitives{{
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 3, 5, 9, 1, 25, 53}},
    {7, 14, {1, 3, 1, 13, 9, 35, 107}},
    {7, 19, {1, 3, 1, 5, 27, 61, 31}},
    {7, 21, {1, 1, 5, 11, 19, 41, 61}},
    {7, 28, {1, 3, 5, 3, 3, 13, 69}},
    {7, 31, {1, 1, 7, 13, 1, 19, 1}},
    {7, 32, {1, 3, 7, 5, 13, 19, 59}},
    {7, 37, {1, 1, 3, 9, 25, 29, 41}},
    {7, 41, {1, 3, 5, 13, 23, 1, 55}},
    {7, 42, {1, 3, 7, 3, 13, 59, 17}},
}};

constexpr double kScale = 1.0 / 4294967296.0;  // 2^-32

}  // namespace

SobolSequence::SobolSequence(std::size_t dimension, std::uint64_t skip) : dimension_(dimension) {
  if (dimension < 1 || dimension > kMaxSobolDimension) {
    throw ConfigError("Sobol dimension must be in [1, " + std::to_string(kMaxSobolDimension) +
                      "], got " + std::to_string(dimension));
  }
  directions_.resize(dimension);
  for (unsigned bit = 0; bit < 32; ++bit) directions_[0][bit] = 1u << (31 - bit);
  for (std::size_t d = 1; d < dimension; ++d) {
    const Primitive& p = kPrimitives[d - 1];
    auto& v = directions_[d];
    const unsigned s = p.degree;
    for (unsigned i = 0; i < s && i < 32; ++i) v[i] = p.m[i] << (31 - i);
    for (unsigned i = s; i < 32; ++i) {
      std::uint32_t value = v[i - s] ^ (v[i - s] >> s);
      for (unsigned k = 1; k < s; ++k) {
        if ((p.coeffs >> (s - 1 - k)) & 1u) value ^= v[i - k];
      }
      v[i] = value;
    }
  }
  seek(skip);
}

void SobolSequence::seek(std::uint64_t index) {
  if (index >= (std::uint64_t{1} << 32)) throw ConfigError("Sobol index beyond 2^32");
  index_ = index;
  state_.assign(dimension_, 0);
  const std::uint64_t gray = index ^ (index >> 1);
  for (unsigned bit = 0; bit < 32; ++bit) {
    if (!((gray >> bit) & 1u)) continue;
    for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= directions_[d][bit];
  }
}

std::vector<double> SobolSequence::next() {
  std::vector<double> point(dimension_);
  for (std::size_t d = 0; d < dimension_; ++d) point[d] = static_cast<double>(state_[d]) * kScale;
  // Advance by flipping the direction number of the lowest zero bit of index.
  unsigned c = 0;
  while ((index_ >> c) & 1u) ++c;
  ++index_;
  if (c < 32) {
    for (std::size_t d = 0; d < dimension_; ++d) state_[d] ^= directions_[d][c];
  }
  return point;
}

std::vector<std::vector<double>> sobol_points(std::size_t dimension, std::size_t count,
                                              std::uint64_t skip) {
  SobolSequence seq(dimension, skip);
  std::vector<std::vector<double>> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) points.push_back(seq.next());
  return points;
}

}  // namespace cropemu::sampling
