#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"
#include "cropemu/weather/autoencoder.hpp"
#include "cropemu/weather/corpus.hpp"
#include "cropemu/weather/latent_index.hpp"
#include "cropemu/weather/metrics.hpp"
#include "cropemu/weather/scenario.hpp"
#include "cropemu/weather/series.hpp"

using namespace cropemu;
using namespace cropemu::weather;

namespace {

WeatherSeries sinusoid_series(std::uint64_t seed, double phase = 0, double amplitude = 14) {
  Rng rng(seed);
  WeatherSeries s;
  s.location = "Site";
  s.lat = 40;
  s.lon = -90;
  s.year = static_cast<int>(seed);
  s.days.resize(kDaysPerYear);
  const double shift = 2 * standard_normal(rng);
  for (std::size_t d = 0; d < kDaysPerYear; ++d) {
    const double season = std::cos(2 * std::numbers::pi * (static_cast<double>(d) - 200 - phase) / 365);
    const double maxT = 18 + shift + amplitude * season + 0.5 * standard_normal(rng);
    s.days[d] = {std::max(0.5, 16 + 8 * season + 0.5 * standard_normal(rng)), maxT,
                 maxT - 10 - 0.3 * standard_normal(rng), uniform01(rng) < 0.3 ? 5.0 : 0.0};
  }
  return s;
}

std::vector<WeatherSeries> three_site_corpus(int years = 4) {
  return generate_corpus({site_climate_for("Randolph"), site_climate_for("Logan"), site_climate_for("Bremer")}, 2000,
                         2000 + years - 1, 17);
}

AeHyper quick(AeHyper h, std::size_t epochs) {
  h.maxEpochs = epochs;
  h.batchSize = 16;
  return h;
}

}  // namespace

TEST_CASE("weather CSV round trip") {
  const auto corpus = three_site_corpus(2);
  std::stringstream ss;
  write_weather_csv(ss, corpus);
  const auto back = read_weather_csv(ss);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == corpus[i]);

  std::stringstream tagged;
  auto synthetic = corpus;
  synthetic[0].sourceTag = SourceTag::Synthetic;
  write_weather_csv(tagged, synthetic, true);
  CHECK(read_weather_csv(tagged)[0].sourceTag == SourceTag::Synthetic);
}

TEST_CASE("forty years at two locations give eighty series") {
  const auto corpus = generate_corpus({site_climate_for("Logan"), site_climate_for("Mason")}, 1984, 2023, 3);
  std::stringstream ss;
  write_weather_csv(ss, corpus);
  CHECK(read_weather_csv(ss).size() == 80);
}

TEST_CASE("weather CSV errors") {
  const std::string header = "location,lat,lon,year,doy,radn,maxt,mint,rain\n";
  SUBCASE("maxT below minT names the line") {
    std::string text = header;
    for (int d = 1; d <= 365; ++d) text += "A,40,-90,2001," + std::to_string(d) + (d == 17 ? ",10,5,9,0\n" : ",10,25,9,0\n");
    std::istringstream in(text);
    try {
      read_weather_csv(in, "w.csv");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("line 18") != std::string::npos);
    }
  }
  SUBCASE("schema violations are parse errors") {
    std::istringstream missing("location,lat,lon,year,doy,radn,maxt,mint\nA,1,2,3,4,5,6,7\n");
    CHECK_THROWS_AS(read_weather_csv(missing), ParseError);
    std::istringstream ragged(header + "A,40,-90,2001,1,10,25\n");
    CHECK_THROWS_AS(read_weather_csv(ragged), ParseError);
    std::istringstream shortYear(header + "A,40,-90,2001,1,10,25,9,0\n");
    CHECK_THROWS_AS(read_weather_csv(shortYear), ParseError);
  }
  SUBCASE("leap years drop February 29") {
    std::string text = header;
    for (int d = 1; d <= 366; ++d) text += "A,40,-90,2000," + std::to_string(d) + ",10," + std::to_string(d) + ",0,0\n";
    std::istringstream in(text);
    const auto s = read_weather_csv(in);
    REQUIRE(s[0].days.size() == 365);
    CHECK(s[0].days[58].maxT == 59);
    CHECK(s[0].days[59].maxT == 61);
  }
}

TEST_CASE("series invariants are validated") {
  auto s = sinusoid_series(1);
  CHECK_NOTHROW(validate(s));
  s.days[3].rain = -1;
  CHECK_THROWS_AS(validate(s), ValidationError);
}

TEST_CASE("reconstruction metrics edge cases") {
  const auto corpus = three_site_corpus(1);
  const ReconMetrics same = reconstruction_metrics(corpus, corpus);
  CHECK(same.maxT.rmse == 0);
  CHECK(*same.maxT.corr == doctest::Approx(1.0));
  CHECK(*same.radn.r2 == 1.0);
  CHECK(*same.occurrence.f1 == 1.0);

  std::vector<double> x{1, 2, 3, 4, 6};
  std::vector<double> mean(5, 3.2);
  CHECK(std::abs(*variable_metrics(x, mean).r2) < 1e-12);
  CHECK_FALSE(variable_metrics(std::vector<double>(4, 2.0), std::span<const double>(x).subspan(0, 4)).r2.has_value());
}

TEST_CASE("occurrence metrics") {
  const OccurrenceMetrics m = occurrence_metrics(43, 2, 4, 51);
  CHECK(*m.precision == doctest::Approx(0.9556).epsilon(1e-4));
  CHECK(*m.recall == doctest::Approx(0.9149).epsilon(1e-4));
  CHECK(*m.f1 == doctest::Approx(0.9348).epsilon(1e-4));
  CHECK(std::abs(f1_score(0.9501, 0.9149) - 0.9321) < 5e-4);

  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    const auto draw = [&] { return uniform_index(rng, 50); };
    const std::size_t tp = draw() + 1, fp = draw(), fn = draw(), tn = draw();
    const OccurrenceMetrics r = occurrence_metrics(tp, fp, fn, tn);
    const double total = static_cast<double>(tp + fp + fn + tn);
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(tp + tn) / total));
    CHECK(*r.f1 == doctest::Approx(2 * *r.precision * *r.recall / (*r.precision + *r.recall)));
    CHECK(*r.f1 == doctest::Approx(2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn)));
    CHECK(*r.f1 <= std::max(*r.precision, *r.recall) + 1e-12);
    CHECK(*r.f1 >= std::min(*r.precision, *r.recall) - 1e-12);
  }
}

TEST_CASE("autoencoder shapes") {
  nn::Network enc(encoder_spec(3, 10), {3, 365});
  CHECK(enc.output_shape() == std::vector<std::size_t>{10});
  nn::Network dec(decoder_spec(6, 2), {6});
  CHECK(dec.output_shape() == std::vector<std::size_t>{2, 365});
  CHECK_THROWS_AS(train_temprad_ae({}, AeHyper::temprad_defaults()), InputError);
}

TEST_CASE("temperature-radiation autoencoder memorizes one series") {
  const std::vector<WeatherSeries> one{sinusoid_series(5)};
  AeHyper h = quick(AeHyper::temprad_defaults(), 600);
  h.learningRate = 1e-2;
  WeatherModel m;
  m.tempRad = train_temprad_ae(one, h);
  m.rain = train_rain_ae(one, quick(AeHyper::rain_defaults(), 2));
  const auto rec = m.decode(m.encode(one), one);
  const ReconMetrics r = reconstruction_metrics(one, rec);
  CHECK(*r.maxT.r2 > 0.99);
  CHECK(*r.minT.r2 > 0.99);
  CHECK(*r.radn.r2 > 0.99);
  for (std::size_t e = 1; e < m.tempRad.bestLoss.size(); ++e) CHECK(m.tempRad.bestLoss[e] <= m.tempRad.bestLoss[e - 1]);
}

TEST_CASE("held-out sinusoid series reconstruct well") {
  std::vector<WeatherSeries> train, test;
  for (std::uint64_t i = 0; i < 50; ++i) (i % 5 == 4 ? test : train).push_back(sinusoid_series(100 + i, 10.0 * (static_cast<double>(i % 7) - 3)));
  AeHyper h = quick(AeHyper::temprad_defaults(), 120);
  h.learningRate = 3e-3;
  WeatherModel m;
  m.tempRad = train_temprad_ae(train, h);
  m.rain = train_rain_ae(train, quick(AeHyper::rain_defaults(), 1));
  const ReconMetrics r = reconstruction_metrics(test, m.decode(m.encode(test), test));
  CHECK(*r.maxT.r2 >= 0.9);
  CHECK(*r.minT.r2 >= 0.9);
}

TEST_CASE("rain autoencoder on an all-dry corpus predicts dry days") {
  std::vector<WeatherSeries> dry;
  for (std::uint64_t i = 0; i < 4; ++i) {
    auto s = sinusoid_series(i);
    for (auto& d : s.days) d.rain = 0;
    dry.push_back(s);
  }
  AeHyper h = quick(AeHyper::rain_defaults(), 60);
  h.learningRate = 1e-2;
  WeatherModel m;
  m.tempRad = train_temprad_ae(dry, quick(AeHyper::temprad_defaults(), 1));
  m.rain = train_rain_ae(dry, h);
  const ReconMetrics r = reconstruction_metrics(dry, m.decode(m.encode(dry), dry));
  CHECK(r.occurrence.accuracy == 1.0);
  CHECK_FALSE(r.occurrence.precision.has_value());
}

TEST_CASE("weather model file round trip") {
  const auto corpus = three_site_corpus(1);
  WeatherModel m;
  m.tempRad = train_temprad_ae(corpus, quick(AeHyper::temprad_defaults(), 2));
  m.rain = train_rain_ae(corpus, quick(AeHyper::rain_defaults(), 2));
  const auto path = std::filesystem::temp_directory_path() / "cropemu_weather_model_test.bin";
  save_weather_model(m, path);
  const WeatherModel back = load_weather_model(path);
  std::filesystem::remove(path);
  CHECK(back.encode(corpus) == m.encode(corpus));
  CHECK(back.tempRad.epochLoss == m.tempRad.epochLoss);
}

namespace {

struct TinyModel {
  std::vector<WeatherSeries> corpus = three_site_corpus(4);
  WeatherModel model;
  TinyModel() {
    model.tempRad = train_temprad_ae(corpus, quick(AeHyper::temprad_defaults(), 3));
    model.rain = train_rain_ae(corpus, quick(AeHyper::rain_defaults(), 3));
  }
  LatentIndex index(double weight = 3.0) const {
    const auto codes = model.encode(corpus);
    std::vector<LatentEntry> e;
    for (std::size_t i = 0; i < corpus.size(); ++i) e.push_back({codes[i], corpus[i].location, corpus[i].lat, corpus[i].lon, corpus[i].year});
    return LatentIndex(e, weight);
  }
};

const TinyModel& tiny() {
  static const TinyModel t;
  return t;
}

}  // namespace

TEST_CASE("latent index normalization") {
  const LatentIndex index = tiny().index(3.0);
  const double n = static_cast<double>(index.size());
  for (std::size_t d = 0; d < kIndexDims; ++d) {
    double m = 0, s = 0;
    for (std::size_t i = 0; i < index.size(); ++i) m += index.normalized(i)[d] / n;
    for (std::size_t i = 0; i < index.size(); ++i) s += std::pow(index.normalized(i)[d] - m, 2) / n;
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(std::sqrt(s) - (d == kLatentDims ? 3.0 : 1.0)) < 1e-6);
  }
  CHECK_THROWS_AS(LatentIndex({}, 3.0), InputError);
}

TEST_CASE("synthetic latents are convex combinations") {
  const LatentIndex index = tiny().index();
  const auto samples = synth_latents(index, SynthOptions{100, 5, false, 9});
  std::array<double, kLatentDims> lo, hi;
  lo.fill(INFINITY);
  hi.fill(-INFINITY);
  for (const auto& e : index.entries()) {
    const auto v = flatten(e.code);
    for (std::size_t d = 0; d < kLatentDims; ++d) {
      lo[d] = std::min(lo[d], v[d]);
      hi[d] = std::max(hi[d], v[d]);
    }
  }
  for (const auto& s : samples) {
    CHECK(s.members.size() == 6);
    double total = 0;
    for (double w : s.weights) total += w;
    CHECK(total == doctest::Approx(1.0));
    const auto v = flatten(s.code);
    for (std::size_t d = 0; d < kLatentDims; ++d) {
      CHECK(v[d] >= lo[d] - 1e-12);
      CHECK(v[d] <= hi[d] + 1e-12);
    }
  }
  const auto again = synth_latents(index, SynthOptions{100, 5, false, 9});
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(again[i].code == samples[i].code);
  CHECK_THROWS_AS(synth_latents(index, SynthOptions{1, index.size(), false, 1}), ConfigError);
}

TEST_CASE("same-location neighbors stay at the anchor's site") {
  const LatentIndex index = tiny().index();
  for (std::size_t a = 0; a < index.size(); ++a)
    for (std::size_t j : index.nearest(a, 3, true)) CHECK(index.entries()[j].location == index.entries()[a].location);
  CHECK_THROWS_AS(index.nearest(0, 4, true), ConfigError);
}

TEST_CASE("vertex weights reproduce the anchor decode") {
  const TinyModel& t = tiny();
  const LatentIndex index = t.index();
  const LatentCode code = combine_codes(index, {2, 5, 7}, {1.0, 0.0, 0.0});
  CHECK(code == index.entries()[2].code);
  CHECK_THROWS_AS(combine_codes(index, {2, 5}, {0.5, 0.6}), InputError);

  std::vector<LatentEntry> dup(3, index.entries()[4]);
  const LatentIndex same(dup, 3.0);
  const auto s = synth_generate(same, t.model, SynthOptions{1, 1, false, 3});
  const auto direct = t.model.decode({index.entries()[4].code}, {s[0].series});
  for (std::size_t d = 0; d < kDaysPerYear; ++d) {
    CHECK(s[0].series.days[d].maxT == doctest::Approx(direct[0].days[d].maxT).epsilon(1e-9));
    CHECK((s[0].series.days[d].rain > 0) == (direct[0].days[d].rain > 0));
  }
}

TEST_CASE("a thousand synthetic decodes satisfy the series invariants") {
  const TinyModel& t = tiny();
  const auto samples = synth_generate(t.index(), t.model, SynthOptions{1000, 5, false, 21});
  REQUIRE(samples.size() == 1000);
  std::size_t violations = 0;
  for (const auto& s : samples) {
    CHECK(s.series.sourceTag == SourceTag::Synthetic);
    for (const auto& d : s.series.days) violations += !(d.maxT >= d.minT && d.radn >= 0 && d.rain >= 0 && std::isfinite(d.maxT));
  }
  CHECK(violations == 0);
}

TEST_CASE("scenario perturbation") {
  const WeatherSeries base = three_site_corpus(1)[0];
  SUBCASE("identity spec") {
    const auto out = scenario_perturb(base, ScenarioSpec{}, 4);
    CHECK(out.days == base.days);
    CHECK(out.sourceTag == SourceTag::Perturbed);
  }
  SUBCASE("mean shift") {
    ScenarioSpec s;
    s.deltaMeanT = 4;
    const auto out = scenario_perturb(base, s, 4);
    double a = 0, b = 0;
    for (std::size_t d = 0; d < kDaysPerYear; ++d) {
      a += base.days[d].maxT;
      b += out.days[d].maxT;
    }
    CHECK(std::abs((b - a) / 365 - 4) < 1e-9);
  }
  SUBCASE("intensity scaling") {
    ScenarioSpec s;
    s.intensityScale = 1.5;
    double total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto out = scenario_perturb(base, s, seed);
      double a = 0, b = 0;
      for (std::size_t d = 0; d < kDaysPerYear; ++d) {
        a += base.days[d].rain;
        b += out.days[d].rain;
      }
      CHECK(b / a >= 1.4);
      CHECK(b / a <= 1.6);
      total += b / a;
    }
    CHECK(total / 20 == doctest::Approx(1.5));
  }
  SUBCASE("frequency changes and presets keep invariants") {
    for (const auto& name : scenario_preset_names()) {
      for (double f : {0.6, 1.0, 1.4}) {
        ScenarioSpec s = scenario_preset(name);
        s.wetDayFrequencyFactor = f;
        const auto out = scenario_perturb(base, s, 11);
        CHECK_NOTHROW(validate(out));
        std::size_t wetBase = 0, wetOut = 0;
        for (std::size_t d = 0; d < kDaysPerYear; ++d) {
          wetBase += base.days[d].rain > 0;
          wetOut += out.days[d].rain > 0;
        }
        CHECK(static_cast<double>(wetOut) == std::round(static_cast<double>(wetBase) * f));
      }
    }
    CHECK(scenario_preset("ssp585-like").deltaMeanT == 5.0);
    CHECK(scenario_preset("ssp585-like").extremeQuantileBoost == 1.5);
    CHECK(scenario_preset("ssp245-like").deltaMeanT == 2.5);
    CHECK_THROWS_AS(scenario_preset("rcp85"), ConfigError);
  }
  SUBCASE("nonpositive multipliers are rejected") {
    ScenarioSpec s;
    s.intensityScale = 0;
    CHECK_THROWS_AS(scenario_perturb(base, s, 1), ConfigError);
  }
}

TEST_CASE("corpus generator is deterministic and valid") {
  const auto a = three_site_corpus(3);
  const auto b = three_site_corpus(3);
  CHECK(a == b);
  for (const auto& s : a) CHECK_NOTHROW(validate(s));
}
