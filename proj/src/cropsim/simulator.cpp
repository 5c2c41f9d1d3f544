#include "cropemu/cropsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cropemu/error.hpp"

namespace cropemu::cropsim {

const std::array<std::string_view, kOutputCount>& output_names() {
  static const std::array<std::string_view, kOutputCount> names{
      "DAPtoFlowering", "DAPtoMaturity", "DAPtoHarvesting", "LAIIntegral",     "AboveGroundWt",
      "GrainSize",      "GrainTotalWt",  "TotalWt",         "GrainN",          "AboveGroundN",
      "LeafTranspiration", "SoilWaterEs", "GrainNumberFunction"};
  return names;
}

std::size_t output_index(std::string_view name) {
  const auto& names = output_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw InputError("unknown output '" + std::string(name) + "'");
}

double thermal_time(double maxT, double minT, double baseT, double optT) {
  const double mean = 0.5 * (maxT + minT);
  return std::clamp(mean, baseT, std::max(baseT, optT)) - baseT;
}

double lai_integral(std::span<const double> lai) {
  if (lai.size() < 2) throw InputError("LAI integral needs at least two daily values");
  double area = 0;
  for (std::size_t i = 1; i < lai.size(); ++i) area += 0.5 * (lai[i - 1] + lai[i]);
  return area;
}

WaterFluxes water_balance_step(const BucketParams& p, double state, double rain, double cover,
                               double potentialEvap) {
  WaterFluxes f;
  const double ll15 = p.ll15 * p.depth, dul = p.dul * p.depth, sat = p.sat * p.depth;

  // Curve-number fraction, scaled by how wet the bucket already is.
  const double wetness = std::clamp((state - ll15) / (sat - ll15), 0.0, 1.0);
  const double cn = std::clamp(p.cn2, 0.0, 100.0) / 100.0;
  f.runoff = rain * cn * cn * wetness;
  double s = state + (rain - f.runoff);
  if (s > sat) {
    f.runoff += s - sat;
    s = sat;
  }

  if (s > dul) f.drainage = p.swcon * (s - dul);
  s -= f.drainage;

  f.soilEvap = std::min((1.0 - cover) * potentialEvap, std::max(0.0, s - 0.5 * ll15));
  s -= f.soilEvap;

  const double demand = cover * potentialEvap;
  const double supply = std::max(0.0, s - ll15) * p.uptakeFraction;
  f.transpiration = std::min(demand, supply);
  s -= f.transpiration;
  f.stressFactor = demand > 0 ? f.transpiration / demand : 1.0;
  f.state = s;
  return f;
}

namespace {

constexpr double kMaxLai = 6.0;
constexpr double kLaiPerPlant = 0.75;
constexpr double kRootShareVegetative = 0.2;
constexpr double kGrainFromCurrentGrowth = 0.75;
constexpr double kRemobilizedShare = 0.2;
constexpr double kGnfMidRate = 15.0;  // g/m2/day of above-ground growth
constexpr double kGnfScale = 5.0;
constexpr double kCriticalNVegetative = 0.014;
constexpr double kCriticalNReproductive = 0.009;
constexpr double kMineralizationRate = 1.5e-4;  // per day of the active organic N pool
constexpr double kTopsoilDepthM = 0.3;
constexpr double kSoilCN = 12.0;
constexpr double kInitialMineralN = 2.0;  // g/m2

double potential_lai(double ttSinceEmergence, double ttToFlowering, double lmax) {
  const double mid = 0.5 * ttToFlowering;
  const double scale = 0.12 * ttToFlowering;
  return lmax / (1.0 + std::exp(-(ttSinceEmergence - mid) / scale));
}

double potential_evaporation(const weather::WeatherDay& w) {
  const double mean = 0.5 * (w.maxT + w.minT);
  return std::max(0.0, 0.8 * w.radn / 2.45 * (mean + 5.0) / 45.0);
}

}  // namespace

SimOutputs simulate(const sampling::TraitConfig& c, const weather::WeatherSeries& weather,
                    const SoilProfile& soil, const CropConstants& k) {
  const int days = static_cast<int>(weather.days.size());
  const int sow = k.sowingDayIndex + static_cast<int>(std::lround(c.startDateOffset));
  if (days < static_cast<int>(weather::kDaysPerYear) || sow < 0 || sow >= days) {
    throw InputError("weather series " + weather.location + "/" + std::to_string(weather.year) +
                     " does not cover a season sown on day index " + std::to_string(sow));
  }

  const std::array<double, 5> targets{c.shootLag + c.shootRate * k.sowingDepth, c.juvenileTarget,
                                      k.floralInitiationTarget, c.floweringToGrainFillingTarget,
                                      c.grainFillingTarget};
  const double ttEmergenceToFlowering = c.juvenileTarget + k.floralInitiationTarget;
  const double lmax = std::min(kMaxLai, kLaiPerPlant * c.population);

  BucketParams bucket{c.ll15, c.dul, c.sat, c.swcon, c.cn2Bare, soil.rootZoneDepth};
  double water = (c.ll15 + c.initialWaterPercent / 100.0 * (c.dul - c.ll15)) * soil.rootZoneDepth;

  const double organicN = c.carbon * soil.bd * 1e6 * kTopsoilDepthM / kSoilCN;  // g/m2
  double soilN = kInitialMineralN + 0.1 * c.fertilizeAtSowing + (c.fomCrop == 0 ? 3.0 : -1.0);
  soilN = std::max(0.0, soilN);

  PhenologyState ph;
  double ttSinceEmergence = 0, laiPotPrev = 0;
  double lai = 0, laiAtGrainFill = 0;
  double aboveGround = 0, roots = 0, cropN = 0, nFactor = 1.0;
  double windowGrowth = 0;
  int windowDays = 0;
  double grains = 0, gnf = 0, sink = 0, grain = 0, remobPool = 0;
  bool grainSet = false;
  double transpiration = 0, soilEvap = 0;
  std::vector<double> laiSeries{0.0};
  int lastDap = 0;

  for (int d = sow; d < days; ++d) {
    const weather::WeatherDay& w = weather.days[static_cast<std::size_t>(d)];
    const int dap = d - sow + 1;
    lastDap = dap;

    // Phenology with carry-over of surplus thermal time into the next stage.
    const double tt = thermal_time(w.maxT, w.minT, k.phenologyBaseT, k.phenologyOptT);
    const Stage before = ph.stage;
    double pending = tt;
    while (ph.stage != Stage::EndGrainFill && pending > 0) {
      const std::size_t s = static_cast<std::size_t>(ph.stage);
      const double room = targets[s] - ph.cumulativeThermalTime;
      if (pending < room) {
        ph.cumulativeThermalTime += pending;
        pending = 0;
      } else {
        pending -= room;
        ph.stage = static_cast<Stage>(s + 1);
        ph.cumulativeThermalTime = 0;
        ph.dayOfStageEntry[s + 1] = dap;
      }
    }
    if (before == Stage::PreEmergence && ph.stage != Stage::PreEmergence) laiPotPrev = potential_lai(0, ttEmergenceToFlowering, lmax);
    const bool growing = ph.stage != Stage::PreEmergence && before != Stage::EndGrainFill;
    if (ph.stage != Stage::PreEmergence) ttSinceEmergence += (before == Stage::PreEmergence) ? 0.0 : tt;

    // Canopy.
    const double cover = 1.0 - std::exp(-c.potentialExtinctionCoeff * lai);
    const double pet = potential_evaporation(w);
    bucket.cn2 = c.cn2Bare * (1.0 - 0.2 * cover);
    const WaterFluxes flux = water_balance_step(bucket, water, w.rain, cover, pet);
    water = flux.state;

    double growth = 0;
    if (growing) {
      transpiration += flux.transpiration;
      soilEvap += flux.soilEvap;
      const double tempFactor =
          0.75 + 0.25 * thermal_time(w.maxT, w.minT, c.temperatureFactor1, c.temperatureFactor2) /
                     (c.temperatureFactor2 - c.temperatureFactor1);
      growth = c.rue * w.radn * cover * flux.stressFactor * nFactor * tempFactor;
      const bool vegetative = ph.stage == Stage::Juvenile || ph.stage == Stage::FloralInitiation;
      const double rootShare = vegetative ? kRootShareVegetative : 0.0;
      const double agGrowth = (1.0 - rootShare) * growth;
      aboveGround += agGrowth;
      roots += growth - agGrowth;

      if (ph.stage == Stage::FloweringWindow) {
        windowGrowth += agGrowth;
        ++windowDays;
      }
      if (ph.stage == Stage::GrainFill || ph.stage == Stage::EndGrainFill) {
        if (!grainSet) {
          grainSet = true;
          const double rate = windowDays > 0 ? windowGrowth / windowDays : agGrowth;
          gnf = 1.0 / (1.0 + std::exp(-(rate - kGnfMidRate) / kGnfScale));
          grains = c.maximumGrainsPerCob * c.population * gnf;
          sink = grains * c.maximumPotentialGrainSize / 1000.0;
          remobPool = kRemobilizedShare * aboveGround;
          laiAtGrainFill = lai;
        }
        const double remob = remobPool * std::min(1.0, tt / c.grainFillingTarget);
        grain += std::clamp(kGrainFromCurrentGrowth * agGrowth + remob, 0.0, std::max(0.0, sink - grain));
      }

      // Nitrogen supply and uptake.
      const double tMean = 0.5 * (w.maxT + w.minT);
      soilN += organicN * (1.0 - c.fInert) * kMineralizationRate * std::clamp(tMean / 25.0, 0.0, 1.0);
      const double critical = vegetative ? kCriticalNVegetative : kCriticalNReproductive;
      const double uptake = std::min(soilN, std::max(0.0, critical * aboveGround - cropN));
      soilN -= uptake;
      cropN += uptake;
      const double ratio = aboveGround > 0 ? std::min(1.0, cropN / (critical * aboveGround)) : 1.0;
      nFactor = std::min(1.0, 0.4 + 0.6 * ratio);

      // Leaf area: expansion before flowering, senescence through grain fill.
      if (vegetative) {
        const double pot = potential_lai(ttSinceEmergence, ttEmergenceToFlowering, lmax);
        const double expansion = std::min(1.0, 0.3 + 0.7 * flux.stressFactor) * nFactor;
        lai += std::max(0.0, pot - laiPotPrev) * expansion;
        laiPotPrev = pot;
      } else if (ph.stage == Stage::GrainFill) {
        const double f = std::min(1.0, ph.cumulativeThermalTime / c.grainFillingTarget);
        lai = laiAtGrainFill * (1.0 - 0.95 * std::pow(f, 1.5));
      } else if (ph.stage == Stage::EndGrainFill) {
        lai = laiAtGrainFill * 0.05;
      }
    }
    laiSeries.push_back(ph.stage == Stage::PreEmergence ? 0.0 : lai);

    if (!std::isfinite(water) || !std::isfinite(aboveGround) || !std::isfinite(lai) || !std::isfinite(grain) ||
        !std::isfinite(cropN) || !std::isfinite(soilN)) {
      throw NumericError("non-finite crop state on day index " + std::to_string(d));
    }
    if (ph.stage == Stage::EndGrainFill) break;
  }

  // A season that ends before maturity is closed on its last day.
  auto entry = [&](Stage s) {
    const int e = ph.dayOfStageEntry[static_cast<std::size_t>(s)];
    return e < 0 ? lastDap : e;
  };
  SimOutputs out;
  const int flowering = entry(Stage::FloweringWindow);
  const int maturity = std::max(flowering, entry(Stage::EndGrainFill));
  const int lastAvailable = days - sow;
  out[DAPtoFlowering] = flowering;
  out[DAPtoMaturity] = maturity;
  out[DAPtoHarvesting] = std::min(maturity + static_cast<int>(k.harvestDryingDays), std::max(maturity, lastAvailable));
  out[LAIIntegral] = lai_integral(laiSeries);
  out[AboveGroundWt] = aboveGround * 10.0;
  out[GrainSize] = grains > 0 ? grain / grains : 0.0;
  out[GrainTotalWt] = grain;
  out[TotalWt] = aboveGround + roots;
  out[GrainN] = std::min(c.finalNconc * grain, cropN);
  out[AboveGroundN] = cropN * 10.0;
  out[LeafTranspiration] = transpiration;
  out[SoilWaterEs] = soilEvap;
  out[GrainNumberFunction] = gnf;
  for (std::size_t i = 0; i < kOutputCount; ++i) {
    if (!std::isfinite(out[i]) || out[i] < 0) {
      throw NumericError("invalid output " + std::string(output_names()[i]));
    }
  }
  return out;
}

}  // namespace cropemu::cropsim
