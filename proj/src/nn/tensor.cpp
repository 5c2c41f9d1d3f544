#include "cropemu/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "cropemu/error.hpp"

namespace cropemu::nn {

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_)
    : shape(std::move(shape_)), values(shape_product(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
  if (shape_product(shape) != values.size()) {
    throw ConfigError("tensor shape " + shape_to_string(shape) + " does not match " +
                      std::to_string(values.size()) + " values");
  }
}

std::size_t Tensor::row_size() const {
  return shape.empty() ? 0 : shape_product(std::span(shape).subspan(1));
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t n = row_size();
  return std::span(values).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t n = row_size();
  return std::span(values).subspan(i * n, n);
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  std::vector<std::size_t> out_shape = shape;
  out_shape[0] = rows.size();
  Tensor out(out_shape);
  const std::size_t n = row_size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = row(rows[r]);
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return out;
}

}  // namespace cropemu::nn
