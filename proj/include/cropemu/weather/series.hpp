#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cropemu::weather {

inline constexpr std::size_t kDaysPerYear = 365;

struct WeatherDay {
  double radn = 0;  // MJ m-2 d-1
  double maxT = 0;  // degC
  double minT = 0;  // degC
  double rain = 0;  // mm d-1
  bool operator==(const WeatherDay&) const = default;
};

enum class SourceTag { Historical, Synthetic, Perturbed };
const char* to_string(SourceTag tag);
SourceTag parse_source_tag(const std::string& text);

struct WeatherSeries {
  std::string location;
  double lat = 0;
  double lon = 0;
  int year = 0;
  SourceTag sourceTag = SourceTag::Historical;
  std::vector<WeatherDay> days;  // kDaysPerYear entries

  bool operator==(const WeatherSeries&) const = default;
};

// Throws ValidationError naming the first offending day (maxT < minT,
// negative radiation or rain, non-finite values, wrong length).
void validate(const WeatherSeries& series);

// CSV schema: location,lat,lon,year,doy,radn,maxt,mint,rain[,source]
// doy runs 1..365, or 1..366 in which case day 60 (Feb 29) is dropped.
std::vector<WeatherSeries> read_weather_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<WeatherSeries> load_weather_csv(const std::filesystem::path& path);
void write_weather_csv(std::ostream& out, const std::vector<WeatherSeries>& series,
                       bool with_source_tag = false);

}  // namespace cropemu::weather
