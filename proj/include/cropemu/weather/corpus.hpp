#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cropemu/weather/series.hpp"

namespace cropemu::weather {

// Parameters of the seeded stand-in for a historical station record:
// seasonal sinusoids for temperature and radiation, AR(1) daily anomalies,
// a per-year climate anomaly and a two-state Markov chain for rain.
struct SiteClimate {
  std::string location;
  double lat = 0;
  double lon = 0;
  double annualMaxT = 17;       // degC, yearly mean of maxT
  double maxTAmplitude = 15;    // degC, half the summer-winter swing
  double diurnalRange = 11;     // degC
  double radnMean = 15;         // MJ/m2/day
  double radnAmplitude = 8.5;
  double wetAfterDry = 0.25;
  double wetAfterWet = 0.5;
  double meanWetAmount = 9;     // mm
};

// Climates for the named counties, with temperature falling and rain
// thinning to the north.
SiteClimate site_climate_for(const std::string& county);

std::vector<WeatherSeries> generate_corpus(const std::vector<SiteClimate>& sites, int firstYear,
                                           int lastYear, std::uint64_t seed);

}  // namespace cropemu::weather
