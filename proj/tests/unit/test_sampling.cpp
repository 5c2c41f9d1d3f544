#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"
#include "cropemu/sampling/param_space.hpp"
#include "cropemu/sampling/sobol.hpp"

using namespace cropemu;
using namespace cropemu::sampling;

namespace {

// Textbook Sobol oracle: direction integers m_k from the Bratley-Fox
// recurrence, point n = XOR of v_k over the set bits of gray(n).
double oracle_coordinate(std::size_t dim, std::uint64_t n) {
  struct Poly { unsigned s, a; std::vector<std::uint64_t> m; };
  static const std::vector<Poly> polys = {
      {1, 0, {1}}, {2, 1, {1, 3}}, {3, 1, {1, 3, 1}}, {3, 2, {1, 1, 1}}, {4, 1, {1, 1, 3, 3}}};
  std::vector<std::uint64_t> m(32);
  if (dim == 0) {
    std::fill(m.begin(), m.end(), 1);
  } else {
    const Poly& p = polys.at(dim - 1);
    for (unsigned k = 0; k < p.s; ++k) m[k] = p.m[k];
    for (unsigned k = p.s; k < 32; ++k) {
      std::uint64_t v = m[k - p.s] ^ (m[k - p.s] << p.s);
      for (unsigned j = 1; j < p.s; ++j)
        if ((p.a >> (p.s - 1 - j)) & 1u) v ^= m[k - j] << j;
      m[k] = v;
    }
  }
  const std::uint64_t gray = n ^ (n >> 1);
  std::uint64_t x = 0;
  for (unsigned k = 0; k < 32; ++k)
    if ((gray >> k) & 1u) x ^= m[k] << (31 - k);
  return static_cast<double>(x) / 4294967296.0;
}

}  // namespace

TEST_CASE("first Sobol points in two dimensions") {
  const auto pts = sobol_points(2, 4, 0);
  const std::vector<std::vector<double>> expected{{0, 0}, {0.5, 0.5}, {0.75, 0.25}, {0.25, 0.75}};
  CHECK(pts == expected);
  CHECK(sobol_points(1, 1, 1)[0][0] == 0.5);
}

TEST_CASE("Sobol agrees with the textbook oracle") {
  const auto pts = sobol_points(6, 300, 0);
  for (std::uint64_t n = 0; n < 300; ++n)
    for (std::size_t d = 0; d < 6; ++d) CHECK(pts[n][d] == oracle_coordinate(d, n));
}

TEST_CASE("Sobol point 1000 in 32 dimensions matches the published table") {
  // Reference values from an independent Joe-Kuo implementation.
  const std::vector<double> expected{
      0.2197265625, 0.0966796875, 0.5185546875, 0.6767578125, 0.2802734375, 0.9072265625,
      0.0458984375, 0.8994140625, 0.5009765625, 0.0693359375, 0.0849609375, 0.2548828125,
      0.1611328125, 0.3837890625, 0.1435546875, 0.3701171875, 0.7197265625, 0.3447265625,
      0.9912109375, 0.7255859375, 0.5224609375, 0.5498046875, 0.9501953125, 0.5400390625,
      0.5830078125, 0.9072265625, 0.0400390625, 0.9794921875, 0.0595703125, 0.3408203125,
      0.1474609375, 0.1455078125};
  CHECK(sobol_points(32, 1, 1000)[0] == expected);
  SobolSequence seq(32, 0);
  for (int i = 0; i < 1000; ++i) seq.next();
  CHECK(seq.next() == expected);
}

TEST_CASE("Sobol range and uniqueness") {
  const auto pts = sobol_points(5, 1024, 0);
  std::set<std::vector<double>> unique(pts.begin(), pts.end());
  CHECK(unique.size() == 1024);
  for (const auto& p : pts)
    for (double c : p) CHECK((c >= 0.0 && c < 1.0));
}

TEST_CASE("Sobol dimension limits") {
  CHECK_THROWS_AS(SobolSequence(0), ConfigError);
  CHECK_THROWS_AS(SobolSequence(33), ConfigError);
  CHECK_NOTHROW(SobolSequence(32));
}

TEST_CASE("Sobol beats uniform random on 4x4 box counts") {
  auto discrepancy = [](const std::vector<std::vector<double>>& pts) {
    std::vector<int> counts(16, 0);
    for (const auto& p : pts) counts[static_cast<int>(p[0] * 4) * 4 + static_cast<int>(p[1] * 4)]++;
    double worst = 0;
    for (int c : counts) worst = std::max(worst, std::abs(c - static_cast<double>(pts.size()) / 16));
    return worst;
  };
  const double sobol = discrepancy(sobol_points(2, 1024, 0));
  std::vector<double> random_scores;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(derive_seed(123, s));
    std::vector<std::vector<double>> pts(1024, std::vector<double>(2));
    for (auto& p : pts) p = {uniform01(rng), uniform01(rng)};
    random_scores.push_back(discrepancy(pts));
  }
  std::sort(random_scores.begin(), random_scores.end());
  const double median = 0.5 * (random_scores[9] + random_scores[10]);
  CHECK(sobol < median);
}

TEST_CASE("default space layout") {
  const ParamSpace space = default_param_space();
  CHECK(space.variables.size() == 22);
  CHECK(space.free_dimension() == 21);
  CHECK(space.at(FertilizeAtSowing).cell_count() == 33);
  CHECK(space.at(ShootLag).cell_count() == 21);
  CHECK(space.at(InitialValues).cell_count() == 51);
}

TEST_CASE("decode examples") {
  const ParamSpace space = default_param_space();
  std::vector<double> u(21, 0.0);
  const auto free = space.free_indices();
  auto slot = [&](Var v) { return static_cast<std::size_t>(std::find(free.begin(), free.end(), v) - free.begin()); };
  u[slot(RUE)] = 0.5;
  u[slot(FInert)] = 0.1;
  u[slot(DUL)] = 0.9;
  const TraitConfig cfg = decode_sample(space, u);
  CHECK(cfg.rue == doctest::Approx(1.9));
  CHECK(cfg.fInert == 0.25);
  CHECK(cfg.soilTextureIndex == 2);
  CHECK(cfg.dul == 0.46);
  CHECK(cfg.ll15 == 0.3);
  CHECK(cfg.swcon == 0.2);
  CHECK(cfg.sat == doctest::Approx(0.56));
  CHECK(cfg.fertilizeAtSowing == 30);
  u[slot(FertilizeAtSowing)] = 0.999999;
  CHECK(decode_sample(space, u).fertilizeAtSowing == 350);
}

TEST_CASE("decode rejects bad points") {
  const ParamSpace space = default_param_space();
  CHECK_THROWS_AS(decode_sample(space, std::vector<double>(20, 0.1)), InputError);
  std::vector<double> u(21, 0.1);
  u[3] = 1.0;
  CHECK_THROWS_AS(decode_sample(space, u), InputError);
  u[3] = -0.01;
  CHECK_THROWS_AS(decode_sample(space, u), InputError);
}

TEST_CASE("design batches are deterministic and splittable") {
  const ParamSpace space = default_param_space();
  const auto a = design_batch(space, 10, 1);
  const auto b = design_batch(space, 10, 1);
  CHECK(a.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a[i].config == b[i].config);

  const auto whole = design_batch(space, 30, 0);
  auto first = design_batch(space, 12, 0);
  const auto second = design_batch(space, 18, 12);
  first.insert(first.end(), second.begin(), second.end());
  for (std::size_t i = 0; i < 30; ++i) {
    CHECK(whole[i].config == first[i].config);
    CHECK(whole[i].sobolIndex == first[i].sobolIndex);
  }
}

TEST_CASE("decoded configs stay in range and round-trip into their cell") {
  const ParamSpace space = default_param_space();
  const auto free = space.free_indices();
  SobolSequence seq(21, 1);
  for (int n = 0; n < 1000; ++n) {
    const auto u = seq.next();
    const TraitConfig cfg = decode_sample(space, u);
    CHECK_NOTHROW(validate_config(space, cfg));
    CHECK(std::abs(cfg.sat - cfg.dul - 0.10) < 1e-12);
    CHECK((cfg.swcon == 0.5 || cfg.swcon == 0.2));
    CHECK(cfg.swcon == (cfg.soilTextureIndex == 2 ? 0.2 : 0.5));
    const auto back = encode_sample(space, cfg);
    for (std::size_t k = 0; k < free.size(); ++k) {
      const VariableDef& v = space.variables[free[k]];
      if (v.kind == VariableKind::Continuous) {
        CHECK(std::abs(back[k] - u[k]) <= 1e-12 * std::max(1.0, std::abs(u[k])));
      } else {
        const double cells = static_cast<double>(v.cell_count());
        CHECK(std::floor(back[k] * cells) == std::min(std::floor(u[k] * cells), cells - 1));
      }
    }
  }
}

TEST_CASE("param space text round trip and validation") {
  const ParamSpace space = default_param_space();
  std::stringstream ss;
  write_param_space(ss, space);
  const ParamSpace parsed = parse_param_space(ss);
  REQUIRE(parsed.variables.size() == 22);
  for (std::size_t i = 0; i < 22; ++i) {
    CHECK(parsed.variables[i].name == space.variables[i].name);
    CHECK(parsed.variables[i].cell_count() == space.variables[i].cell_count());
  }
  std::istringstream bad("RUE G continuous 1.6 2.2\n");
  CHECK_THROWS_AS(parse_param_space(bad), ConfigError);
  std::istringstream malformed("ShootLag G grid 45 65\n");
  CHECK_THROWS_AS(parse_param_space(malformed), ParseError);
}

TEST_CASE("design CSV round trip") {
  const ParamSpace space = default_param_space();
  const auto pts = design_batch(space, 25, 1);
  std::stringstream ss;
  write_design_csv(ss, pts);
  const auto back = read_design_csv(ss);
  REQUIRE(back.size() == 25);
  for (std::size_t i = 0; i < 25; ++i) {
    CHECK(back[i].sobolIndex == pts[i].sobolIndex);
    CHECK(back[i].config == pts[i].config);
  }
}
