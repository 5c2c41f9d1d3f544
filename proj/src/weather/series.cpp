#include "cropemu/weather/series.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <tuple>

#include "cropemu/csv.hpp"
#include "cropemu/error.hpp"

namespace cropemu::weather {

const char* to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::Historical: return "historical";
    case SourceTag::Synthetic: return "synthetic";
    case SourceTag::Perturbed: return "perturbed";
  }
  return "historical";
}

SourceTag parse_source_tag(const std::string& text) {
  if (text == "historical") return SourceTag::Historical;
  if (text == "synthetic") return SourceTag::Synthetic;
  if (text == "perturbed") return SourceTag::Perturbed;
  throw ParseError("unknown source tag '" + text + "'");
}

void validate(const WeatherSeries& s) {
  const std::string who = s.location + "/" + std::to_string(s.year);
  if (s.days.size() != kDaysPerYear) {
    throw ValidationError(who + ": expected 365 days, got " + std::to_string(s.days.size()));
  }
  for (std::size_t d = 0; d < s.days.size(); ++d) {
    const WeatherDay& w = s.days[d];
    const std::string day = who + " doy " + std::to_string(d + 1);
    if (!std::isfinite(w.radn) || !std::isfinite(w.maxT) || !std::isfinite(w.minT) || !std::isfinite(w.rain)) {
      throw ValidationError(day + ": non-finite value");
    }
    if (w.maxT < w.minT) throw ValidationError(day + ": maxT < minT");
    if (w.radn < 0) throw ValidationError(day + ": negative radiation");
    if (w.rain < 0) throw ValidationError(day + ": negative rain");
  }
}

std::vector<WeatherSeries> read_weather_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const std::size_t c_loc = t.column("location"), c_lat = t.column("lat"), c_lon = t.column("lon"),
                    c_year = t.column("year"), c_doy = t.column("doy"), c_radn = t.column("radn"),
                    c_max = t.column("maxt"), c_min = t.column("mint"), c_rain = t.column("rain");
  const bool has_source = t.has_column("source");
  const std::size_t c_src = has_source ? t.column("source") : 0;

  struct Pending {
    WeatherSeries series;
    std::map<long, std::pair<WeatherDay, std::size_t>> days;  // doy -> (day, line)
  };
  std::vector<Pending> pending;
  std::map<std::tuple<std::string, long, std::string>, std::size_t> index;

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t line = t.line_numbers[r];
    const std::string where = source + ": line " + std::to_string(line);
    const std::string& loc = t.rows[r][c_loc];
    const long year = t.integer(r, c_year);
    const std::string tag = has_source ? t.rows[r][c_src] : "historical";
    auto key = std::make_tuple(loc, year, tag);
    auto it = index.find(key);
    if (it == index.end()) {
      Pending p;
      p.series.location = loc;
      p.series.lat = t.number(r, c_lat);
      p.series.lon = t.number(r, c_lon);
      p.series.year = static_cast<int>(year);
      p.series.sourceTag = parse_source_tag(tag);
      it = index.emplace(key, pending.size()).first;
      pending.push_back(std::move(p));
    }
    const long doy = t.integer(r, c_doy);
    if (doy < 1 || doy > 366) throw ParseError(where + ": doy must be in 1..366");
    WeatherDay d{t.number(r, c_radn), t.number(r, c_max), t.number(r, c_min), t.number(r, c_rain)};
    if (d.maxT < d.minT) {
      throw ValidationError(where + ": maxT " + csv::format_double(d.maxT) + " < minT " +
                            csv::format_double(d.minT));
    }
    if (!pending[it->second].days.emplace(doy, std::make_pair(d, line)).second) {
      throw ParseError(where + ": duplicate doy " + std::to_string(doy));
    }
  }

  std::vector<WeatherSeries> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    const bool leap = p.days.size() == 366;
    if (p.days.size() != 365 && !leap) {
      throw ParseError(source + ": " + p.series.location + "/" + std::to_string(p.series.year) +
                       " has " + std::to_string(p.days.size()) + " days");
    }
    for (const auto& [doy, day] : p.days) {
      if (leap && doy == 60) continue;
      if (!leap && doy > 365) throw ParseError(source + ": line " + std::to_string(day.second) + ": doy 366 in a 365-day year");
      p.series.days.push_back(day.first);
    }
    validate(p.series);
    out.push_back(std::move(p.series));
  }
  return out;
}

std::vector<WeatherSeries> load_weather_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open weather file " + path.string());
  return read_weather_csv(in, path.string());
}

void write_weather_csv(std::ostream& out, const std::vector<WeatherSeries>& series, bool with_source_tag) {
  csv::Writer w(out);
  for (auto h : {"location", "lat", "lon", "year", "doy", "radn", "maxt", "mint", "rain"}) w.field(h);
  if (with_source_tag) w.field("source");
  w.end_row();
  for (const auto& s : series) {
    for (std::size_t d = 0; d < s.days.size(); ++d) {
      const WeatherDay& day = s.days[d];
      w.field(s.location).field(s.lat).field(s.lon).field(s.year).field(d + 1);
      w.field(day.radn).field(day.maxT).field(day.minT).field(day.rain);
      if (with_source_tag) w.field(to_string(s.sourceTag));
      w.end_row();
    }
  }
}

}  // namespace cropemu::weather
