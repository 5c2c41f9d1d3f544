#include "cropemu/sampling/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cropemu/csv.hpp"
#include "cropemu/error.hpp"
#include "cropemu/sampling/sobol.hpp"

namespace cropemu::sampling {
namespace {

constexpr std::array<std::string_view, kVariableCount> kNames{
    "ShootLag",           "ShootRate",         "JuvenileTarget", "FloweringToGrainFillingTarget",
    "GrainFillingTarget", "MaximumPotentialGrainSize",           "MaximumGrainsPerCob",
    "FinalNconc",         "TemperatureFactor1", "TemperatureFactor2",
    "PotentialExtinctionCoeff", "RUE",         "DUL",            "Carbon",
    "InitialValues",      "FInert",            "CN2Bare",        "SWCON",
    "FOM",                "Population",        "StartDate",      "FertilizeAtSowing"};

constexpr std::array<SoilTexture, 3> kTextures{{
    {"sandy", 0.10, 0.20, 0.5},
    {"loam", 0.20, 0.33, 0.5},
    {"clay", 0.30, 0.46, 0.2},
}};

VariableDef continuous(std::string_view name, VariableGroup g, double lo, double hi) {
  VariableDef v;
  v.name = name;
  v.group = g;
  v.kind = VariableKind::Continuous;
  v.lowerBound = lo;
  v.upperBound = hi;
  return v;
}

VariableDef grid(std::string_view name, VariableGroup g, double lo, double hi, double step) {
  VariableDef v = continuous(name, g, lo, hi);
  v.kind = VariableKind::CategoricalGrid;
  v.gridStep = step;
  return v;
}

VariableDef levels(std::string_view name, VariableGroup g, std::vector<double> values) {
  VariableDef v;
  v.name = name;
  v.group = g;
  v.kind = VariableKind::CategoricalLevels;
  v.levels = std::move(values);
  return v;
}

char group_code(VariableGroup g) {
  switch (g) {
    case VariableGroup::Genetic: return 'G';
    case VariableGroup::Environmental: return 'E';
    case VariableGroup::Management: return 'M';
  }
  return '?';
}

void check_definition(const VariableDef& v, std::size_t index) {
  const std::string where = "variable " + v.name;
  if (v.name != kNames[index]) {
    throw ConfigError("expected variable '" + std::string(kNames[index]) + "' at position " +
                      std::to_string(index + 1) + ", got '" + v.name + "'");
  }
  const bool swcon = index == SWCON;
  if (swcon != (v.kind == VariableKind::Derived)) {
    throw ConfigError(where + ": only SWCON is derived (rule swcon_by_texture)");
  }
  switch (v.kind) {
    case VariableKind::Continuous:
      if (!(v.lowerBound < v.upperBound)) throw ConfigError(where + ": lower bound must be < upper");
      break;
    case VariableKind::CategoricalGrid:
      if (!(v.lowerBound < v.upperBound) || !(v.gridStep > 0)) {
        throw ConfigError(where + ": grid needs lower < upper and step > 0");
      }
      break;
    case VariableKind::CategoricalLevels:
      if (v.levels.empty()) throw ConfigError(where + ": levels must be non-empty");
      break;
    case VariableKind::Derived:
      if (v.derivationRule != "swcon_by_texture") {
        throw ConfigError(where + ": unknown derivation rule '" + v.derivationRule + "'");
      }
      break;
  }
  if (index == DUL) {
    if (v.kind != VariableKind::CategoricalLevels) throw ConfigError(where + ": must be levels");
    for (double l : v.levels)
      if (l != 0 && l != 1 && l != 2) throw ConfigError(where + ": texture levels must be 0, 1, 2");
  }
  if (index == FOM && v.kind == VariableKind::CategoricalLevels) {
    for (double l : v.levels)
      if (l != 0 && l != 1) throw ConfigError(where + ": FOM levels must be 0 or 1");
  }
}

}  // namespace

std::size_t VariableDef::cell_count() const {
  switch (kind) {
    case VariableKind::CategoricalGrid:
      return static_cast<std::size_t>(std::floor((upperBound - lowerBound) / gridStep + 1e-9)) + 1;
    case VariableKind::CategoricalLevels: return levels.size();
    default: return 0;
  }
}

double VariableDef::cell_value(std::size_t i) const {
  if (kind == VariableKind::CategoricalLevels) return levels.at(i);
  return lowerBound + static_cast<double>(i) * gridStep;
}

double VariableDef::min_value() const {
  if (kind == VariableKind::CategoricalLevels) return *std::min_element(levels.begin(), levels.end());
  return lowerBound;
}

double VariableDef::max_value() const {
  if (kind == VariableKind::CategoricalLevels) return *std::max_element(levels.begin(), levels.end());
  if (kind == VariableKind::CategoricalGrid) return cell_value(cell_count() - 1);
  return upperBound;
}

const std::array<std::string_view, kVariableCount>& variable_names() { return kNames; }

std::size_t variable_index(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return i;
  throw InputError("unknown variable '" + std::string(name) + "'");
}

const SoilTexture& soil_texture(int index) {
  if (index < 0 || index > 2) throw InputError("soil texture index must be 0, 1 or 2");
  return kTextures[static_cast<std::size_t>(index)];
}

std::size_t ParamSpace::free_dimension() const { return free_indices().size(); }

std::vector<std::size_t> ParamSpace::free_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].kind != VariableKind::Derived) idx.push_back(i);
  return idx;
}

ParamSpace default_param_space() {
  using G = VariableGroup;
  ParamSpace s;
  s.variables = {
      grid(kNames[ShootLag], G::Genetic, 45, 65, 1),
      continuous(kNames[ShootRate], G::Genetic, 0.4, 0.8),
      grid(kNames[JuvenileTarget], G::Genetic, 200, 240, 1),
      grid(kNames[FloweringToGrainFillingTarget], G::Genetic, 100, 200, 1),
      grid(kNames[GrainFillingTarget], G::Genetic, 600, 800, 1),
      grid(kNames[MaximumPotentialGrainSize], G::Genetic, 250, 350, 1),
      grid(kNames[MaximumGrainsPerCob], G::Genetic, 500, 1000, 1),
      continuous(kNames[FinalNconc], G::Genetic, 0.0067, 0.016),
      grid(kNames[TemperatureFactor1], G::Genetic, 5, 12, 1),
      grid(kNames[TemperatureFactor2], G::Genetic, 20, 27, 1),
      continuous(kNames[PotentialExtinctionCoeff], G::Genetic, 0.3, 0.5),
      continuous(kNames[RUE], G::Genetic, 1.6, 2.2),
      levels(kNames[DUL], G::Environmental, {0, 1, 2}),
      continuous(kNames[Carbon], G::Environmental, 0.01, 0.05),
      grid(kNames[InitialValues], G::Environmental, 50, 100, 1),
      levels(kNames[FInert], G::Environmental, {0.25, 0.5, 0.75}),
      continuous(kNames[CN2Bare], G::Environmental, 60, 100),
      VariableDef{std::string(kNames[SWCON]), G::Environmental, VariableKind::Derived, 0, 0, 0, {},
                  "swcon_by_texture"},
      levels(kNames[FOM], G::Environmental, {0, 1}),
      grid(kNames[Population], G::Management, 5, 9, 1),
      grid(kNames[StartDate], G::Management, 0, 50, 1),
      grid(kNames[FertilizeAtSowing], G::Management, 30, 350, 10),
  };
  return s;
}

ParamSpace parse_param_space(std::istream& in, const std::string& source) {
  ParamSpace s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source + ": line " + std::to_string(line_no);
    if (tok.size() < 4) throw ParseError(where + ": expected 'name group kind args...'");
    VariableDef v;
    v.name = tok[0];
    if (tok[1] == "G") v.group = VariableGroup::Genetic;
    else if (tok[1] == "E") v.group = VariableGroup::Environmental;
    else if (tok[1] == "M") v.group = VariableGroup::Management;
    else throw ParseError(where + ": group must be G, E or M");
    auto num = [&](std::size_t i) { return csv::parse_double(tok.at(i), where); };
    const std::string& kind = tok[2];
    if (kind == "continuous") {
      if (tok.size() != 5) throw ParseError(where + ": continuous takes lower upper");
      v.kind = VariableKind::Continuous;
      v.lowerBound = num(3);
      v.upperBound = num(4);
    } else if (kind == "grid") {
      if (tok.size() != 6) throw ParseError(where + ": grid takes lower upper step");
      v.kind = VariableKind::CategoricalGrid;
      v.lowerBound = num(3);
      v.upperBound = num(4);
      v.gridStep = num(5);
    } else if (kind == "levels") {
      v.kind = VariableKind::CategoricalLevels;
      for (std::size_t i = 3; i < tok.size(); ++i) v.levels.push_back(num(i));
    } else if (kind == "derived") {
      if (tok.size() != 4) throw ParseError(where + ": derived takes one rule name");
      v.kind = VariableKind::Derived;
      v.derivationRule = tok[3];
    } else {
      throw ParseError(where + ": unknown kind '" + kind + "'");
    }
    if (s.variables.size() >= kVariableCount) throw ConfigError(where + ": more than 22 variables");
    check_definition(v, s.variables.size());
    s.variables.push_back(std::move(v));
  }
  if (s.variables.size() != kVariableCount) {
    throw ConfigError(source + ": expected 22 variables, found " + std::to_string(s.variables.size()));
  }
  return s;
}

ParamSpace load_param_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_param_space(in, path.string());
}

void write_param_space(std::ostream& out, const ParamSpace& space) {
  out << "# name group kind args\n";
  for (const auto& v : space.variables) {
    out << v.name << ' ' << group_code(v.group) << ' ';
    switch (v.kind) {
      case VariableKind::Continuous:
        out << "continuous " << csv::format_double(v.lowerBound) << ' ' << csv::format_double(v.upperBound);
        break;
      case VariableKind::CategoricalGrid:
        out << "grid " << csv::format_double(v.lowerBound) << ' ' << csv::format_double(v.upperBound) << ' '
            << csv::format_double(v.gridStep);
        break;
      case VariableKind::CategoricalLevels:
        out << "levels";
        for (double l : v.levels) out << ' ' << csv::format_double(l);
        break;
      case VariableKind::Derived:
        out << "derived " << v.derivationRule;
        break;
    }
    out << '\n';
  }
}

double get_value(const TraitConfig& c, std::size_t var) {
  switch (var) {
    case ShootLag: return c.shootLag;
    case ShootRate: return c.shootRate;
    case JuvenileTarget: return c.juvenileTarget;
    case FloweringToGrainFillingTarget: return c.floweringToGrainFillingTarget;
    case GrainFillingTarget: return c.grainFillingTarget;
    case MaximumPotentialGrainSize: return c.maximumPotentialGrainSize;
    case MaximumGrainsPerCob: return c.maximumGrainsPerCob;
    case FinalNconc: return c.finalNconc;
    case TemperatureFactor1: return c.temperatureFactor1;
    case TemperatureFactor2: return c.temperatureFactor2;
    case PotentialExtinctionCoeff: return c.potentialExtinctionCoeff;
    case RUE: return c.rue;
    case DUL: return c.soilTextureIndex;
    case Carbon: return c.carbon;
    case InitialValues: return c.initialWaterPercent;
    case FInert: return c.fInert;
    case CN2Bare: return c.cn2Bare;
    case SWCON: return c.swcon;
    case FOM: return c.fomCrop;
    case Population: return c.population;
    case StartDate: return c.startDateOffset;
    case FertilizeAtSowing: return c.fertilizeAtSowing;
    default: throw InputError("variable index out of range");
  }
}

void apply_derived(TraitConfig& c) {
  const SoilTexture& t = soil_texture(c.soilTextureIndex);
  c.ll15 = t.ll15;
  c.dul = t.dul;
  c.sat = t.dul + kSaturationAboveDul;
  c.swcon = t.swcon;
}

void set_value(TraitConfig& c, std::size_t var, double v) {
  switch (var) {
    case ShootLag: c.shootLag = v; break;
    case ShootRate: c.shootRate = v; break;
    case JuvenileTarget: c.juvenileTarget = v; break;
    case FloweringToGrainFillingTarget: c.floweringToGrainFillingTarget = v; break;
    case GrainFillingTarget: c.grainFillingTarget = v; break;
    case MaximumPotentialGrainSize: c.maximumPotentialGrainSize = v; break;
    case MaximumGrainsPerCob: c.maximumGrainsPerCob = v; break;
    case FinalNconc: c.finalNconc = v; break;
    case TemperatureFactor1: c.temperatureFactor1 = v; break;
    case TemperatureFactor2: c.temperatureFactor2 = v; break;
    case PotentialExtinctionCoeff: c.potentialExtinctionCoeff = v; break;
    case RUE: c.rue = v; break;
    case DUL:
      c.soilTextureIndex = static_cast<int>(std::lround(v));
      apply_derived(c);
      break;
    case Carbon: c.carbon = v; break;
    case InitialValues: c.initialWaterPercent = v; break;
    case FInert: c.fInert = v; break;
    case CN2Bare: c.cn2Bare = v; break;
    case SWCON: apply_derived(c); break;
    case FOM: c.fomCrop = static_cast<int>(std::lround(v)); break;
    case Population: c.population = v; break;
    case StartDate: c.startDateOffset = v; break;
    case FertilizeAtSowing: c.fertilizeAtSowing = v; break;
    default: throw InputError("variable index out of range");
  }
}

std::vector<double> free_values(const ParamSpace& space, const TraitConfig& cfg) {
  std::vector<double> out;
  for (std::size_t i : space.free_indices()) out.push_back(get_value(cfg, i));
  return out;
}

TraitConfig decode_sample(const ParamSpace& space, std::span<const double> point) {
  const auto free = space.free_indices();
  if (point.size() != free.size()) {
    throw InputError("sample has " + std::to_string(point.size()) + " coordinates, space needs " +
                     std::to_string(free.size()));
  }
  TraitConfig cfg;
  for (std::size_t k = 0; k < free.size(); ++k) {
    const double u = point[k];
    if (!(u >= 0.0 && u < 1.0)) {
      throw InputError("coordinate " + std::to_string(k) + " = " + csv::format_double(u) +
                       " outside [0,1)");
    }
    const VariableDef& v = space.variables[free[k]];
    double value = 0.0;
    if (v.kind == VariableKind::Continuous) {
      value = v.lowerBound + u * (v.upperBound - v.lowerBound);
    } else {
      const std::size_t cells = v.cell_count();
      const std::size_t idx = std::min(static_cast<std::size_t>(std::floor(u * static_cast<double>(cells))),
                                       cells - 1);
      value = v.cell_value(idx);
    }
    set_value(cfg, free[k], value);
  }
  apply_derived(cfg);
  return cfg;
}

std::vector<double> encode_sample(const ParamSpace& space, const TraitConfig& cfg) {
  std::vector<double> point;
  for (std::size_t i : space.free_indices()) {
    const VariableDef& v = space.variables[i];
    const double value = get_value(cfg, i);
    if (v.kind == VariableKind::Continuous) {
      point.push_back((value - v.lowerBound) / (v.upperBound - v.lowerBound));
      continue;
    }
    const std::size_t cells = v.cell_count();
    std::size_t best = 0;
    for (std::size_t c = 1; c < cells; ++c)
      if (std::abs(v.cell_value(c) - value) < std::abs(v.cell_value(best) - value)) best = c;
    point.push_back((static_cast<double>(best) + 0.5) / static_cast<double>(cells));
  }
  return point;
}

void validate_config(const ParamSpace& space, const TraitConfig& cfg) {
  for (std::size_t i : space.free_indices()) {
    const VariableDef& v = space.variables[i];
    const double value = get_value(cfg, i);
    bool ok = false;
    if (v.kind == VariableKind::Continuous) {
      ok = value >= v.lowerBound && value <= v.upperBound;
    } else {
      for (std::size_t c = 0; c < v.cell_count(); ++c) ok = ok || std::abs(v.cell_value(c) - value) < 1e-9;
    }
    if (!ok) throw ValidationError(v.name + " = " + csv::format_double(value) + " outside its range");
  }
  const SoilTexture& t = soil_texture(cfg.soilTextureIndex);
  if (cfg.dul != t.dul || cfg.ll15 != t.ll15 || cfg.swcon != t.swcon ||
      std::abs(cfg.sat - cfg.dul - kSaturationAboveDul) > 1e-12) {
    throw ValidationError("derived soil quantities inconsistent with texture class");
  }
}

std::vector<DesignPoint> design_batch(const ParamSpace& space, std::size_t count, std::uint64_t skip,
                                      std::uint64_t /*seed*/) {
  if (count < 1) throw InputError("design count must be >= 1");
  SobolSequence seq(space.free_dimension(), skip);
  std::vector<DesignPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t index = seq.index();
    const auto point = seq.next();
    out.push_back({index, decode_sample(space, point)});
  }
  return out;
}

void write_design_csv(std::ostream& out, const std::vector<DesignPoint>& points) {
  csv::Writer w(out);
  w.field("sobol_index");
  for (auto name : kNames) w.field(name);
  w.end_row();
  for (const auto& p : points) {
    w.field(static_cast<std::size_t>(p.sobolIndex));
    for (std::size_t i = 0; i < kVariableCount; ++i) w.field(get_value(p.config, i));
    w.end_row();
  }
}

std::vector<DesignPoint> read_design_csv(std::istream& in, const std::string& source) {
  const csv::Table t = csv::read(in, source);
  const std::size_t idx_col = t.column("sobol_index");
  std::array<std::size_t, kVariableCount> cols{};
  for (std::size_t i = 0; i < kVariableCount; ++i) cols[i] = t.column(kNames[i]);
  std::vector<DesignPoint> points;
  points.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    DesignPoint p;
    p.sobolIndex = static_cast<std::uint64_t>(t.integer(r, idx_col));
    for (std::size_t i = 0; i < kVariableCount; ++i) {
      if (i == SWCON) continue;
      set_value(p.config, i, t.number(r, cols[i]));
    }
    apply_derived(p.config);
    points.push_back(p);
  }
  return points;
}

}  // namespace cropemu::sampling
