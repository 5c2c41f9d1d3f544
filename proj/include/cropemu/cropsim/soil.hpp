#pragma once

#include <span>
#include <string>
#include <string_view>

namespace cropemu::cropsim {

inline constexpr double kRootZoneDepth = 1000.0;  // mm
inline constexpr double kParticleDensity = 2.65;  // g/cm3

struct SoilProfile {
  std::string county;
  double lon = 0;
  double lat = 0;
  double dul = 0;   // mm/mm
  double ll15 = 0;  // mm/mm
  double carbon = 0;
  double initialWaterPercent = 0;
  double fInert = 0;
  double cn2 = 0;
  double sat = 0;   // mm/mm
  double bd = 0;    // g/cm3
  std::string texture;
  double rootZoneDepth = kRootZoneDepth;

  double porosity() const { return 1.0 - bd / kParticleDensity; }
};

// Throws ValidationError naming the county and the broken bound.
void validate(const SoilProfile& soil);

// The six static county rows (Randolph, Mason, Poweshiek, Bremer, Logan, Osceola).
std::span<const SoilProfile> county_soils();
// Case-sensitive lookup; throws InputError listing the known names.
const SoilProfile& county_soil(std::string_view county);

}  // namespace cropemu::cropsim
