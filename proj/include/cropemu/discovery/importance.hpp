#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cropemu/nn/tensor.hpp"

namespace cropemu::discovery {

// Maps a (rows x features) matrix to one prediction per row.
using Predictor = std::function<std::vector<double>(const nn::Tensor&)>;

struct Importance {
  std::string name;
  double drop = 0;     // mean r2 drop over repeats
  double dropStd = 0;  // sample std of the drop over repeats
  double percent = 0;  // share of the total positive drop
  int rank = 0;        // 1 = largest drop
};

double r2_score(const std::vector<double>& predicted, const std::vector<double>& target);

// Shuffles one column at a time and records the fall in r2 against target.
// Ranks break ties by column order. Throws InputError on an empty slice or
// zero repeats.
std::vector<Importance> permutation_importance(const Predictor& predictor, const nn::Tensor& features,
                                               const std::vector<double>& target,
                                               const std::vector<std::string>& names, std::size_t repeats,
                                               std::uint64_t seed);

// Mean r2 drop when every column is shuffled with one shared permutation.
double joint_permutation_drop(const Predictor& predictor, const nn::Tensor& features,
                              const std::vector<double>& target, std::size_t repeats, std::uint64_t seed);

}  // namespace cropemu::discovery
