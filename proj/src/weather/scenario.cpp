#include "cropemu/weather/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::weather {
namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void validate(const ScenarioSpec& s) {
  for (double m : {s.seasonalAmplification, s.wetDayFrequencyFactor, s.intensityScale, s.extremeQuantileBoost}) {
    if (!(m > 0) || !std::isfinite(m)) throw ConfigError("scenario " + s.name + ": multipliers must be positive");
  }
  if (!std::isfinite(s.deltaMeanT)) throw ConfigError("scenario " + s.name + ": deltaMeanT must be finite");
}

ScenarioSpec scenario_preset(const std::string& name) {
  if (name == "control") return ScenarioSpec{};
  if (name == "ssp245-like") return ScenarioSpec{name, 2.5, 1.1, 1.05, 1.05, 1.2};
  if (name == "ssp585-like") return ScenarioSpec{name, 5.0, 1.2, 1.1, 1.1, 1.5};
  throw ConfigError("unknown scenario preset '" + name + "'");
}

std::vector<std::string> scenario_preset_names() { return {"control", "ssp245-like", "ssp585-like"}; }

WeatherSeries scenario_perturb(const WeatherSeries& base, const ScenarioSpec& spec, std::uint64_t seed) {
  validate(spec);
  validate(base);
  WeatherSeries out = base;
  out.sourceTag = SourceTag::Perturbed;
  const double n = static_cast<double>(base.days.size());

  double meanMax = 0;
  for (const auto& d : base.days) meanMax += d.maxT / n;
  for (auto& d : out.days) {
    const double shift = spec.deltaMeanT + (spec.seasonalAmplification - 1.0) * std::max(0.0, d.maxT - meanMax);
    d.maxT += shift;
    d.minT += shift;
  }

  std::vector<std::size_t> wet, dry;
  std::vector<double> amounts;
  for (std::size_t i = 0; i < base.days.size(); ++i) {
    if (base.days[i].rain > 0) {
      wet.push_back(i);
      amounts.push_back(base.days[i].rain);
    } else {
      dry.push_back(i);
    }
  }
  if (wet.empty()) return out;

  Rng rng(derive_seed(seed, 0x5ce7));
  const auto target = static_cast<std::size_t>(
      std::clamp(std::round(static_cast<double>(wet.size()) * spec.wetDayFrequencyFactor), 0.0, n));
  if (target > wet.size()) {
    shuffle(dry, rng);
    for (std::size_t i = 0; i < target - wet.size(); ++i) out.days[dry[i]].rain = amounts[uniform_index(rng, amounts.size())];
  } else if (target < wet.size()) {
    std::vector<std::size_t> drop = wet;
    shuffle(drop, rng);
    for (std::size_t i = 0; i < wet.size() - target; ++i) out.days[drop[i]].rain = 0.0;
  }

  const double q95 = quantile(amounts, 0.95);
  for (auto& d : out.days) {
    if (d.rain <= 0) continue;
    const double boost = d.rain > q95 ? spec.extremeQuantileBoost : 1.0;
    d.rain *= spec.intensityScale * boost;
  }
  return out;
}

}  // namespace cropemu::weather
