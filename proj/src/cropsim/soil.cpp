#include "cropemu/cropsim/soil.hpp"

#include <array>

#include "cropemu/error.hpp"

namespace cropemu::cropsim {
namespace {

SoilProfile row(const char* county, double lon, double lat, double dul, double ll15, double carbon,
                double initial, double finert, double cn2, double sat, double bd, const char* texture) {
  return SoilProfile{county, lon, lat, dul, ll15, carbon, initial, finert, cn2, sat, bd, texture, kRootZoneDepth};
}

const std::array<SoilProfile, 6>& table() {
  static const std::array<SoilProfile, 6> soils{
      row("Randolph", -90.06, 38.0567, 0.4479, 0.3281, 0.0074, 92.71, 0.7472, 100.00, 0.5469, 1.1982, "clay loam"),
      row("Mason", -89.7201, 40.3537, 0.0967, 0.0406, 0.0066, 90.64, 0.7780, 60.00, 0.4257, 1.5200, "sandy"),
      row("Poweshiek", -92.2234, 41.5487, 0.3022, 0.1718, 0.0055, 69.68, 0.7837, 92.67, 0.4285, 1.5117, "sandy loam"),
      row("Bremer", -92.1385, 42.8147, 0.3134, 0.1631, 0.0293, 95.61, 0.6214, 100.00, 0.5205, 1.2681, "sandy loam"),
      row("Logan", -89.4897, 39.9315, 0.3661, 0.1604, 0.0118, 88.15, 0.7317, 74.67, 0.4964, 1.3318, "sandy loam"),
      row("Osceola", -95.8179, 43.3630, 0.3977, 0.2216, 0.0287, 83.18, 0.6137, 99.33, 0.5761, 1.1208, "clay loam"),
  };
  return soils;
}

}  // namespace

void validate(const SoilProfile& s) {
  auto fail = [&](const std::string& what) { throw ValidationError("soil " + s.county + ": " + what); };
  if (!(s.ll15 > 0 && s.ll15 < s.dul)) fail("requires 0 < LL15 < DUL");
  if (!(s.dul < s.sat)) fail("requires DUL < SAT");
  if (!(s.sat <= s.porosity() + 1e-12)) fail("SAT exceeds porosity implied by BD");
  if (!(s.initialWaterPercent >= 0 && s.initialWaterPercent <= 100)) fail("initial water outside [0, 100]");
  if (!(s.rootZoneDepth > 0)) fail("root zone depth must be positive");
}

std::span<const SoilProfile> county_soils() { return table(); }

const SoilProfile& county_soil(std::string_view county) {
  for (const auto& s : table())
    if (s.county == county) return s;
  std::string known;
  for (const auto& s : table()) known += (known.empty() ? "" : ", ") + s.county;
  throw InputError("unknown county '" + std::string(county) + "' (known: " + known + ")");
}

}  // namespace cropemu::cropsim
