#pragma once

#include <span>
#include <string>
#include <vector>

#include "cropemu/nn/tensor.hpp"

namespace cropemu::emulator {

// Per-column z-score transform of a (rows x columns) matrix.
struct ColumnScaler {
  std::vector<double> means;
  std::vector<double> stds;

  // Fits on the given rows (all rows when empty). Throws ConfigError naming
  // the first zero-variance column.
  static ColumnScaler fit(const nn::Tensor& matrix, std::span<const std::size_t> rows,
                          const std::vector<std::string>& names);

  std::size_t width() const { return means.size(); }
  nn::Tensor transform(const nn::Tensor& matrix) const;
  nn::Tensor inverse(const nn::Tensor& matrix) const;
  bool operator==(const ColumnScaler&) const = default;
};

struct Standardizer {
  ColumnScaler features;
  ColumnScaler targets;
  bool operator==(const Standardizer&) const = default;
};

}  // namespace cropemu::emulator
