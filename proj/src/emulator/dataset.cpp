#include "cropemu/emulator/dataset.hpp"

#include <cmath>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::emulator {

std::vector<std::size_t> EmulatorDataset::rows(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == which) out.push_back(i);
  return out;
}

std::vector<std::string> feature_names(const sampling::ParamSpace& space) {
  std::vector<std::string> names;
  for (std::size_t v : space.free_indices()) names.push_back(space.variables[v].name);
  for (std::size_t i = 0; i < cropsim::kTempRadLatent; ++i) names.push_back("t" + std::to_string(i));
  for (std::size_t i = 0; i < cropsim::kRainLatent; ++i) names.push_back("r" + std::to_string(i));
  names.push_back("lat");
  return names;
}

std::vector<double> feature_row(const sampling::ParamSpace& space, const sampling::TraitConfig& cfg,
                                const WeatherFeatures& weather) {
  std::vector<double> row = sampling::free_values(space, cfg);
  row.insert(row.end(), weather.latent.begin(), weather.latent.end());
  row.push_back(weather.lat);
  return row;
}

EmulatorDataset build_dataset(const sampling::ParamSpace& space,
                              const std::vector<sampling::TraitConfig>& designs,
                              const std::vector<WeatherFeatures>& weather,
                              const std::vector<cropsim::SimOutputs>& outputs, double testFraction,
                              std::uint64_t seed) {
  const std::size_t n = designs.size();
  if (weather.size() != n || outputs.size() != n) {
    throw InputError("dataset inputs differ in length: " + std::to_string(n) + " designs, " +
                     std::to_string(weather.size()) + " weather rows, " + std::to_string(outputs.size()) +
                     " outputs");
  }
  if (!(testFraction >= 0.0 && testFraction < 1.0)) throw ConfigError("test fraction must be in [0, 1)");
  EmulatorDataset ds;
  ds.featureNames = feature_names(space);
  for (auto name : cropsim::output_names()) ds.targetNames.emplace_back(name);
  const std::size_t F = ds.featureNames.size();
  const std::size_t T = cropsim::kOutputCount;
  ds.features = nn::Tensor({n, F});
  ds.targets = nn::Tensor({n, T});
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = feature_row(space, designs[i], weather[i]);
    std::copy(row.begin(), row.end(), ds.features.values.begin() + static_cast<long>(i * F));
    for (std::size_t k = 0; k < T; ++k) ds.targets.values[i * T + k] = outputs[i].values[k];
  }
  ds.split.assign(n, Split::Train);
  Rng rng(derive_seed(seed, 0x5917));
  const auto order = permutation(n, rng);
  const auto testCount = static_cast<std::size_t>(std::llround(testFraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < testCount; ++i) ds.split[order[i]] = Split::Test;
  return ds;
}

EmulatorDataset build_dataset(const sampling::ParamSpace& space,
                              const std::vector<cropsim::DatasetRow>& rows, double testFraction,
                              std::uint64_t seed) {
  std::vector<sampling::TraitConfig> designs;
  std::vector<WeatherFeatures> weather;
  std::vector<cropsim::SimOutputs> outputs;
  for (const auto& r : rows) {
    designs.push_back(r.config);
    weather.push_back({r.latent, r.lat});
    outputs.push_back(r.outputs);
  }
  return build_dataset(space, designs, weather, outputs, testFraction, seed);
}

}  // namespace cropemu::emulator
