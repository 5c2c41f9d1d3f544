#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cropemu::nn {

// Dense row-major buffer of doubles. The leading dimension is the batch.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> values_);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t batch() const { return shape.empty() ? 0 : shape[0]; }
  // Number of values per batch row.
  std::size_t row_size() const;

  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  // Copies the given batch rows into a new tensor with the same trailing
  // shape.
  Tensor gather_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Tensor&) const = default;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_to_string(std::span<const std::size_t> shape);

}  // namespace cropemu::nn
