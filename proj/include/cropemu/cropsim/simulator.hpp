#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cropemu/cropsim/soil.hpp"
#include "cropemu/sampling/param_space.hpp"
#include "cropemu/weather/series.hpp"

namespace cropemu::cropsim {

enum Output : std::size_t {
  DAPtoFlowering,
  DAPtoMaturity,
  DAPtoHarvesting,
  LAIIntegral,
  AboveGroundWt,  // kg/ha
  GrainSize,      // g per grain
  GrainTotalWt,   // g/m2
  TotalWt,        // g/m2
  GrainN,         // g/m2
  AboveGroundN,   // kg/ha
  LeafTranspiration,
  SoilWaterEs,
  GrainNumberFunction,
  kOutputCount
};

const std::array<std::string_view, kOutputCount>& output_names();
// Throws InputError for an unknown name.
std::size_t output_index(std::string_view name);

struct SimOutputs {
  std::array<double, kOutputCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  bool operator==(const SimOutputs&) const = default;
};

enum class Stage { PreEmergence, Juvenile, FloralInitiation, FloweringWindow, GrainFill, EndGrainFill };

struct PhenologyState {
  Stage stage = Stage::PreEmergence;
  double cumulativeThermalTime = 0;  // within the current stage
  std::array<int, 6> dayOfStageEntry{0, -1, -1, -1, -1, -1};
};

// Daily thermal time from the clamped mean temperature.
double thermal_time(double maxT, double minT, double baseT, double optT);

// Trapezoid rule with unit spacing. Throws InputError below two values.
double lai_integral(std::span<const double> dailyLai);

struct BucketParams {
  double ll15 = 0;  // mm/mm
  double dul = 0;
  double sat = 0;
  double swcon = 0;          // 1/day
  double cn2 = 0;            // effective curve number
  double depth = kRootZoneDepth;
  double uptakeFraction = 0.07;  // share of plant-available water extractable per day
};

struct WaterFluxes {
  double state = 0;  // mm
  double runoff = 0;
  double drainage = 0;
  double soilEvap = 0;
  double transpiration = 0;
  double stressFactor = 1;
};

WaterFluxes water_balance_step(const BucketParams& p, double state, double rain, double canopyCover,
                               double potentialEvap);

// Fixed crop constants of the oracle.
struct CropConstants {
  int sowingDayIndex = 120;  // May 1 as a 0-based day of a 365-day year
  double sowingDepth = 50;   // mm
  double phenologyBaseT = 8;
  double phenologyOptT = 34;
  double floralInitiationTarget = 500;  // degC day from end of juvenile to flowering
  double harvestDryingDays = 7;
};

// Runs the crop from sowing (May 1 + StartDate) to maturity. The config's
// soil variables are authoritative; the profile contributes bulk density and
// root zone depth. Throws InputError when the series is too short for the
// sowing date and NumericError naming the day on non-finite state.
SimOutputs simulate(const sampling::TraitConfig& config, const weather::WeatherSeries& weather,
                    const SoilProfile& soil, const CropConstants& constants = {});

}  // namespace cropemu::cropsim
