#pragma once

#include <vector>

#include "cropemu/nn/tensor.hpp"

namespace cropemu::discovery {

struct PcaResult {
  nn::Tensor coordinates;                // n x components
  std::vector<double> explained;         // variance fraction per component
  std::vector<std::vector<double>> loadings;  // per component, one weight per column
};

// Principal components of the z-scored columns (constant columns dropped to
// zero). Each component's largest-magnitude loading is made positive.
// Throws InputError with fewer than 2 points or more components than
// columns.
PcaResult pca_project(const nn::Tensor& points, std::size_t components = 2);

}  // namespace cropemu::discovery
