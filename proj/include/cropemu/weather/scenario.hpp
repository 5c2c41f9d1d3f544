#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cropemu/weather/series.hpp"

namespace cropemu::weather {

// Parametric stand-in for a future-climate projection of a baseline year.
struct ScenarioSpec {
  std::string name = "control";
  double deltaMeanT = 0;              // degC added to maxT and minT
  double seasonalAmplification = 1;   // scales maxT excess over its annual mean
  double wetDayFrequencyFactor = 1;
  double intensityScale = 1;
  double extremeQuantileBoost = 1;    // extra factor above the 95th percentile wet amount

  bool operator==(const ScenarioSpec&) const = default;
};

// Throws ConfigError unless every multiplier is positive and finite.
void validate(const ScenarioSpec& spec);

// "control", "ssp245-like", "ssp585-like". Labeled stand-ins, not
// reproductions of any projection. Throws ConfigError for other names.
ScenarioSpec scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

// Shifts and amplifies temperatures, resamples the wet-day set to the
// requested frequency (new wet days draw amounts from the base wet days) and
// rescales amounts. The result carries the perturbed source tag.
WeatherSeries scenario_perturb(const WeatherSeries& base, const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace cropemu::weather
