#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cropemu/cropsim/dataset.hpp"
#include "cropemu/nn/tensor.hpp"
#include "cropemu/sampling/param_space.hpp"

namespace cropemu::emulator {

enum class Split { Train, Test };

// Weather side of one emulator input: the encoded series and its latitude.
struct WeatherFeatures {
  std::array<double, cropsim::kLatentWidth> latent{};
  double lat = 0;
};

// Feature layout: free config variables in canonical order (SWCON skipped),
// then the 10 temperature-radiation latents, the 6 rain latents and the
// latitude. Targets are the 13 simulator outputs in output order.
struct EmulatorDataset {
  nn::Tensor features;  // rows x (freeDimension + 17)
  nn::Tensor targets;   // rows x 13
  std::vector<Split> split;
  std::vector<std::string> featureNames;
  std::vector<std::string> targetNames;

  std::size_t size() const { return split.size(); }
  std::vector<std::size_t> rows(Split which) const;
};

std::vector<std::string> feature_names(const sampling::ParamSpace& space);
std::vector<double> feature_row(const sampling::ParamSpace& space, const sampling::TraitConfig& cfg,
                                const WeatherFeatures& weather);

// Test rows are the first round(testFraction * n) entries of a seeded
// permutation. Throws InputError when the three inputs differ in length.
EmulatorDataset build_dataset(const sampling::ParamSpace& space,
                              const std::vector<sampling::TraitConfig>& designs,
                              const std::vector<WeatherFeatures>& weather,
                              const std::vector<cropsim::SimOutputs>& outputs, double testFraction,
                              std::uint64_t seed);

EmulatorDataset build_dataset(const sampling::ParamSpace& space,
                              const std::vector<cropsim::DatasetRow>& rows, double testFraction,
                              std::uint64_t seed);

}  // namespace cropemu::emulator
