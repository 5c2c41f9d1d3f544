#include "cropemu/emulator/standardizer.hpp"

#include <cmath>

#include "cropemu/error.hpp"

namespace cropemu::emulator {
namespace {

void check_width(const nn::Tensor& m, std::size_t width) {
  if (m.rank() != 2 || m.shape[1] != width) {
    throw InputError("expected a matrix with " + std::to_string(width) + " columns, got shape " +
                     nn::shape_to_string(m.shape));
  }
}

}  // namespace

ColumnScaler ColumnScaler::fit(const nn::Tensor& matrix, std::span<const std::size_t> rows,
                               const std::vector<std::string>& names) {
  if (matrix.rank() != 2) throw InputError("scaler expects a matrix, got shape " + nn::shape_to_string(matrix.shape));
  const std::size_t cols = matrix.shape[1];
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(matrix.batch());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  if (rows.empty()) throw InputError("cannot fit a scaler on zero rows");
  ColumnScaler s;
  s.means.assign(cols, 0.0);
  s.stds.assign(cols, 0.0);
  const double n = static_cast<double>(rows.size());
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < cols; ++c) s.means[c] += matrix.values[r * cols + c];
  for (auto& m : s.means) m /= n;
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = matrix.values[r * cols + c] - s.means[c];
      s.stds[c] += d * d;
    }
  for (std::size_t c = 0; c < cols; ++c) {
    s.stds[c] = std::sqrt(s.stds[c] / n);
    if (!(s.stds[c] > 1e-12 * std::max(1.0, std::abs(s.means[c])))) {
      const std::string name = c < names.size() ? names[c] : "column " + std::to_string(c);
      throw ConfigError("zero-variance column '" + name + "' cannot be standardized");
    }
  }
  return s;
}

nn::Tensor ColumnScaler::transform(const nn::Tensor& matrix) const {
  check_width(matrix, width());
  nn::Tensor out = matrix;
  const std::size_t cols = width();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t c = k % cols;
    out.values[k] = (out.values[k] - means[c]) / stds[c];
  }
  return out;
}

nn::Tensor ColumnScaler::inverse(const nn::Tensor& matrix) const {
  check_width(matrix, width());
  nn::Tensor out = matrix;
  const std::size_t cols = width();
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t c = k % cols;
    out.values[k] = out.values[k] * stds[c] + means[c];
  }
  return out;
}

}  // namespace cropemu::emulator
