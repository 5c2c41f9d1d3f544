#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cropemu/weather/series.hpp"

namespace cropemu::weather {

struct VariableMetrics {
  std::size_t count = 0;
  double rmse = 0;
  double mae = 0;
  double bias = 0;                 // mean(reconstructed - original)
  std::optional<double> corr;      // missing when either side is constant
  std::optional<double> r2;        // 1 - SSE/SST; missing when SST == 0
};

struct OccurrenceMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double accuracy = 0;
  std::optional<double> precision;  // missing when nothing is predicted wet
  std::optional<double> recall;     // missing when nothing is wet
  std::optional<double> f1;         // missing when precision + recall == 0 or undefined
};

struct ReconMetrics {
  VariableMetrics radn, maxT, minT;
  VariableMetrics rain;  // wet days of the original only
  OccurrenceMetrics occurrence;
};

// Throws InputError on length mismatch or empty input.
VariableMetrics variable_metrics(std::span<const double> original, std::span<const double> reconstructed);

double f1_score(double precision, double recall);
OccurrenceMetrics occurrence_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

// Pools all days of paired series.
ReconMetrics reconstruction_metrics(const std::vector<WeatherSeries>& original,
                                    const std::vector<WeatherSeries>& reconstructed);

}  // namespace cropemu::weather
