#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cropemu/cropsim/simulator.hpp"

namespace cropemu::cropsim {

inline constexpr std::size_t kTempRadLatent = 10;
inline constexpr std::size_t kRainLatent = 6;
inline constexpr std::size_t kLatentWidth = kTempRadLatent + kRainLatent;

// One simulated (config, weather, location) case. The latent block stays
// zero until the weather module encodes the series.
struct DatasetRow {
  std::uint64_t id = 0;
  std::string location;
  double lat = 0;
  std::string weatherKey;  // identifies the series within its weather file
  sampling::TraitConfig config;
  std::array<double, kLatentWidth> latent{};
  SimOutputs outputs;

  bool operator==(const DatasetRow&) const = default;
};

struct SimJob {
  sampling::TraitConfig config;
  const weather::WeatherSeries* weather = nullptr;
  const SoilProfile* soil = nullptr;
};

// Runs every job through simulate, in parallel, results in job order.
std::vector<SimOutputs> run_batch(const std::vector<SimJob>& jobs, const CropConstants& constants = {});

// Key of a series within a weather file: "<location>/<year>/<source>".
std::string weather_key(const weather::WeatherSeries& series);

// Columns: id,location,lat,weather, 22 inputs, 16 latents (t0..t9, r0..r5),
// 13 outputs.
void write_dataset_csv(std::ostream& out, const std::vector<DatasetRow>& rows);
std::vector<DatasetRow> read_dataset_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace cropemu::cropsim
