#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cropemu::sampling {

enum class VariableGroup { Genetic, Environmental, Management };
enum class VariableKind { Continuous, CategoricalGrid, CategoricalLevels, Derived };

struct VariableDef {
  std::string name;
  VariableGroup group = VariableGroup::Genetic;
  VariableKind kind = VariableKind::Continuous;
  double lowerBound = 0.0;
  double upperBound = 0.0;
  double gridStep = 0.0;
  std::vector<double> levels;
  std::string derivationRule;

  // Number of hypercube cells along this axis (categorical kinds only).
  std::size_t cell_count() const;
  // Value of the i-th grid cell or level.
  double cell_value(std::size_t i) const;
  double min_value() const;
  double max_value() const;
};

// Canonical variable order. The decoded/encoded coordinate order follows it
// with the derived SWCON entry skipped.
enum Var : std::size_t {
  ShootLag,
  ShootRate,
  JuvenileTarget,
  FloweringToGrainFillingTarget,
  GrainFillingTarget,
  MaximumPotentialGrainSize,
  MaximumGrainsPerCob,
  FinalNconc,
  TemperatureFactor1,
  TemperatureFactor2,
  PotentialExtinctionCoeff,
  RUE,
  DUL,  // soil texture class index
  Carbon,
  InitialValues,
  FInert,
  CN2Bare,
  SWCON,
  FOM,
  Population,
  StartDate,
  FertilizeAtSowing,
  kVariableCount
};

const std::array<std::string_view, kVariableCount>& variable_names();
// Throws InputError for an unknown name.
std::size_t variable_index(std::string_view name);

// Volumetric (LL15, DUL) pair and drainage coefficient of a texture class.
struct SoilTexture {
  std::string_view label;
  double ll15;
  double dul;
  double swcon;
};
// 0 sandy, 1 loam, 2 clay. Throws InputError otherwise.
const SoilTexture& soil_texture(int index);
inline constexpr double kSaturationAboveDul = 0.10;

struct ParamSpace {
  std::vector<VariableDef> variables;

  std::size_t free_dimension() const;
  // Canonical indices of the non-derived variables, in encoding order.
  std::vector<std::size_t> free_indices() const;
  const VariableDef& at(Var v) const { return variables[v]; }
};

// The 22-variable space used for the emulator training design.
ParamSpace default_param_space();

// Plain-text definition; one variable per line:
//   name group kind args...
// kinds: continuous lo hi | grid lo hi step | levels v1 v2 ... | derived rule
// Variables must appear once each, in canonical order.
ParamSpace parse_param_space(std::istream& in, const std::string& source = "<stream>");
ParamSpace load_param_space(const std::filesystem::path& path);
void write_param_space(std::ostream& out, const ParamSpace& space);

// One decoded point of the input space with the texture-derived soil
// quantities filled in.
struct TraitConfig {
  double shootLag = 0;                       // degC day
  double shootRate = 0;                      // degC day per mm sowing depth
  double juvenileTarget = 0;                 // degC day
  double floweringToGrainFillingTarget = 0;  // degC day
  double grainFillingTarget = 0;             // degC day
  double maximumPotentialGrainSize = 0;      // mg per grain
  double maximumGrainsPerCob = 0;
  double finalNconc = 0;                     // kg/kg
  double temperatureFactor1 = 0;             // degC
  double temperatureFactor2 = 0;             // degC
  double potentialExtinctionCoeff = 0;
  double rue = 0;                            // g/MJ
  int soilTextureIndex = 0;
  double carbon = 0;                         // fraction
  double initialWaterPercent = 0;            // % of plant-available water
  double fInert = 0;
  double cn2Bare = 0;
  double swcon = 0;                          // 1/day, derived
  int fomCrop = 0;                           // 0 soybean residue, 1 maize residue
  double population = 0;                     // plants / m2
  double startDateOffset = 0;                // days after May 1
  double fertilizeAtSowing = 0;              // kg N / ha
  // derived from texture
  double ll15 = 0;
  double dul = 0;
  double sat = 0;

  bool operator==(const TraitConfig&) const = default;
};

double get_value(const TraitConfig& cfg, std::size_t var);
// Sets a variable; for DUL and SWCON the texture-derived fields are refreshed.
void set_value(TraitConfig& cfg, std::size_t var, double value);
// Recomputes ll15/dul/sat/swcon from soilTextureIndex.
void apply_derived(TraitConfig& cfg);

// Values of the free variables in encoding order (emulator input layout).
std::vector<double> free_values(const ParamSpace& space, const TraitConfig& cfg);

// Throws InputError when the point has the wrong length or a coordinate
// outside [0, 1).
TraitConfig decode_sample(const ParamSpace& space, std::span<const double> point);

// Inverse of decode_sample up to the categorical cell: continuous variables
// map back linearly; categorical ones map to their cell midpoint.
std::vector<double> encode_sample(const ParamSpace& space, const TraitConfig& cfg);

// Throws ValidationError naming the first out-of-range variable.
void validate_config(const ParamSpace& space, const TraitConfig& cfg);

struct DesignPoint {
  std::uint64_t sobolIndex = 0;
  TraitConfig config;
};

// Configs decoded from consecutive Sobol points starting at skip. The
// unscrambled sequence makes the result independent of seed; the argument is
// kept so callers record it uniformly.
std::vector<DesignPoint> design_batch(const ParamSpace& space, std::size_t count,
                                      std::uint64_t skip = 1, std::uint64_t seed = 0);

// CSV with one column per variable (canonical names) plus sobol_index.
void write_design_csv(std::ostream& out, const std::vector<DesignPoint>& points);
std::vector<DesignPoint> read_design_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace cropemu::sampling
