#include "cropemu/weather/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cropemu/cropsim/soil.hpp"
#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::weather {

SiteClimate site_climate_for(const std::string& county) {
  const auto& soil = cropsim::county_soil(county);
  SiteClimate c;
  c.location = soil.county;
  c.lat = soil.lat;
  c.lon = soil.lon;
  const double north = soil.lat - 38.0;
  c.annualMaxT = 21.0 - 0.8 * north;
  c.maxTAmplitude = 14.0 + 0.5 * north;
  c.radnMean = 15.5 - 0.3 * north;
  c.wetAfterDry = 0.27 - 0.01 * north;
  c.meanWetAmount = 10.0 - 0.4 * north;
  return c;
}

std::vector<WeatherSeries> generate_corpus(const std::vector<SiteClimate>& sites, int firstYear, int lastYear,
                                           std::uint64_t seed) {
  if (sites.empty() || lastYear < firstYear) throw InputError("corpus needs at least one site and year");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::vector<WeatherSeries> out;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    const SiteClimate& c = sites[s];
    for (int year = firstYear; year <= lastYear; ++year) {
      Rng rng(derive_seed(seed, s * 100000 + static_cast<std::uint64_t>(year)));
      // Year-level anomalies give the corpus between-year structure.
      const double tempShift = 1.2 * standard_normal(rng);
      const double springShift = 1.5 * standard_normal(rng);
      const double wetShift = std::clamp(1.0 + 0.25 * standard_normal(rng), 0.4, 1.8);
      const double amountShift = std::clamp(1.0 + 0.2 * standard_normal(rng), 0.5, 1.6);
      const double radnShift = 0.8 * standard_normal(rng);

      WeatherSeries series;
      series.location = c.location;
      series.lat = c.lat;
      series.lon = c.lon;
      series.year = year;
      series.sourceTag = SourceTag::Historical;
      series.days.resize(kDaysPerYear);
      double anomaly = 0, radnAnomaly = 0;
      bool wet = false;
      for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        const double t = static_cast<double>(d);
        const double season = std::cos(kTwoPi * (t - 200.0) / 365.0);
        const double radnSeason = std::cos(kTwoPi * (t - 172.0) / 365.0);
        const double warmHalf = d > 90 && d < 270 ? springShift * std::sin(std::numbers::pi * (t - 90) / 180) : 0.0;

        const double summerRain = 1.0 + 0.35 * radnSeason;
        const double pWet = std::clamp((wet ? c.wetAfterWet : c.wetAfterDry) * wetShift * summerRain, 0.0, 0.95);
        wet = uniform01(rng) < pWet;
        double rain = 0;
        if (wet) {
          const double u = uniform01(rng);
          rain = -c.meanWetAmount * amountShift * summerRain * std::log(1.0 - u);
          rain = std::round(rain * 10.0) / 10.0;
          if (rain <= 0) rain = 0.1;
        }

        anomaly = 0.7 * anomaly + 2.2 * standard_normal(rng);
        radnAnomaly = 0.5 * radnAnomaly + 2.0 * standard_normal(rng);
        const double maxT = c.annualMaxT + c.maxTAmplitude * season + tempShift + warmHalf + anomaly - (wet ? 2.0 : 0.0);
        const double range = std::max(2.0, c.diurnalRange + 1.5 * standard_normal(rng) - (wet ? 3.0 : 0.0));
        const double clear = c.radnMean + c.radnAmplitude * radnSeason + radnShift + radnAnomaly;
        const double radn = std::max(1.0, clear * (wet ? 0.6 : 1.0));

        WeatherDay& day = series.days[d];
        day.maxT = std::round(maxT * 10.0) / 10.0;
        day.minT = std::round((maxT - range) * 10.0) / 10.0;
        day.radn = std::round(radn * 10.0) / 10.0;
        day.rain = rain;
      }
      validate(series);
      out.push_back(std::move(series));
    }
  }
  return out;
}

}  // namespace cropemu::weather
