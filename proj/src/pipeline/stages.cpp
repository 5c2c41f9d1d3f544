#include "cropemu/pipeline/stages.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cropemu/cropsim/dataset.hpp"
#include "cropemu/csv.hpp"
#include "cropemu/discovery/cluster.hpp"
#include "cropemu/discovery/importance.hpp"
#include "cropemu/discovery/pca.hpp"
#include "cropemu/emulator/dataset.hpp"
#include "cropemu/error.hpp"
#include "cropemu/log.hpp"
#include "cropemu/random.hpp"
#include "cropemu/swag/ensemble.hpp"
#include "cropemu/weather/corpus.hpp"
#include "cropemu/weather/latent_index.hpp"
#include "cropemu/weather/metrics.hpp"
#include "cropemu/weather/scenario.hpp"

namespace cropemu::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams of the stages, derived from the run seed.
enum SeedStream : std::uint64_t {
  kSeedTempRadAe = 1,
  kSeedRainAe,
  kSeedSynth,
  kSeedSplit,
  kSeedEmulator,
  kSeedSwag,
  kSeedEnsemble,
  kSeedBnSubset,
  kSeedKMeans,
  kSeedImportance,
  kSeedPerturb = 0x100,
};

std::uint64_t stage_seed(const RunConfig& cfg, std::uint64_t stream) { return derive_seed(cfg.seed, stream); }

struct Run {
  const RunConfig& cfg;
  Stage stage;
  fs::path out;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;

  fs::path need(const char* name, Stage producer) {
    const fs::path p = out / name;
    if (!fs::exists(p)) {
      throw InputError(std::string("stage '") + stage_name(stage) + "' needs " + p.string() +
                       "; run 'cropemu " + stage_name(producer) + "' first");
    }
    inputs[name] = file_checksum(p);
    return p;
  }

  fs::path need_external(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw InputError(std::string(what) + " not found: " + p.string());
    inputs[p.string()] = file_checksum(p);
    return p;
  }

  // Writes via a temporary file so a failed stage leaves no partial artifact.
  void write(const char* name, const std::string& bytes) { write_path(out / name, name, bytes); }

  void write_path(const fs::path& p, const std::string& label, const std::string& bytes) {
    fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!f) throw InputError("cannot write " + tmp.string());
      f << bytes;
      if (!f) throw InputError("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
    outputs[label] = hex64(fnv1a64(bytes));
  }

  template <typename F>
  void write_with(const char* name, F&& body) {
    std::ostringstream ss;
    body(ss);
    write(name, ss.str());
  }

  void write_json(const char* name, const json& j) { write(name, j.dump(2) + "\n"); }

  // Records this stage in the manifest, keeping other stages' entries.
  void finish() {
    const fs::path p = out / artifact::kManifest;
    json m = json::object();
    if (fs::exists(p)) {
      std::ifstream in(p);
      try {
        m = json::parse(in);
      } catch (const json::exception&) {
        m = json::object();
      }
    }
    m["tool"] = "cropemu";
    m["format"] = 1;
    json entry;
    entry["configHash"] = config_hash(cfg);
    entry["seed"] = cfg.seed;
    entry["config"] = config_to_json(cfg);
    entry["inputs"] = inputs;
    entry["outputs"] = outputs;
    m["stages"][stage_name(stage)] = entry;
    std::ofstream f(p, std::ios::binary);
    f << m.dump(2) << "\n";
  }
};

sampling::ParamSpace space_of(const RunConfig& cfg) {
  return cfg.paths.paramSpace.empty() ? sampling::default_param_space()
                                      : sampling::load_param_space(cfg.paths.paramSpace);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json variable_json(const weather::VariableMetrics& m) {
  return {{"count", m.count}, {"rmse", m.rmse}, {"mae", m.mae}, {"bias", m.bias}, {"corr", opt(m.corr)},
          {"r2", opt(m.r2)}};
}

json recon_json(const weather::ReconMetrics& r) {
  const auto& o = r.occurrence;
  return {{"radn", variable_json(r.radn)},
          {"maxT", variable_json(r.maxT)},
          {"minT", variable_json(r.minT)},
          {"rain", variable_json(r.rain)},
          {"occurrence",
           {{"tp", o.tp},
            {"fp", o.fp},
            {"fn", o.fn},
            {"tn", o.tn},
            {"accuracy", o.accuracy},
            {"precision", opt(o.precision)},
            {"recall", opt(o.recall)},
            {"f1", opt(o.f1)}}}};
}

json regression_json(const emulator::RegressionReport& r) {
  json per = json::array();
  for (const auto& o : r.perOutput) {
    per.push_back({{"name", o.name}, {"mse", o.mse}, {"mae", o.mae}, {"r2", o.r2}, {"rawMae", o.rawMae}});
  }
  return {{"mse", r.mse}, {"mae", r.mae}, {"rmse", r.rmse}, {"r2", r.r2}, {"targetVariance", r.targetVariance},
          {"perOutput", per}};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

std::vector<cropsim::DatasetRow> read_dataset(const fs::path& p) {
  std::ifstream in(p);
  return cropsim::read_dataset_csv(in, p.string());
}

// Training rows used to refresh batch norm for each ensemble member.
nn::Tensor bn_subset(const emulator::EmulatorDataset& ds, const RunConfig& cfg) {
  std::vector<std::size_t> train = ds.rows(emulator::Split::Train);
  Rng rng(stage_seed(cfg, kSeedBnSubset));
  shuffle(train, rng);
  train.resize(std::min(train.size(), cfg.swag.batchNormUpdateBatches * cfg.swag.batchSize));
  return ds.features.gather_rows(train);
}

emulator::EmulatorDataset load_split_dataset(Run& run, const sampling::ParamSpace& space) {
  const auto rows = read_dataset(run.need(artifact::kDataset, Stage::Simulate));
  return emulator::build_dataset(space, rows, run.cfg.emulator.testFraction, stage_seed(run.cfg, kSeedSplit));
}

const cropsim::SoilProfile& oracle_soil(const RunConfig& cfg, const std::string& location) {
  return cropsim::county_soil(cfg.oracle.soil == "county" ? location : cfg.oracle.soil);
}

// ---------------------------------------------------------------------------

void stage_design(Run& run) {
  const auto space = space_of(run.cfg);
  if (!run.cfg.paths.paramSpace.empty()) run.need_external(run.cfg.paths.paramSpace, "param space");
  const auto pts = sampling::design_batch(space, run.cfg.sampling.count, run.cfg.sampling.skip, run.cfg.seed);
  run.write_with(artifact::kParamSpace, [&](std::ostream& o) { sampling::write_param_space(o, space); });
  run.write_with(artifact::kDesign, [&](std::ostream& o) { sampling::write_design_csv(o, pts); });
}

void stage_gen_corpus(Run& run, const fs::path& target) {
  std::vector<weather::SiteClimate> sites;
  for (const auto& s : run.cfg.corpus.sites) sites.push_back(weather::site_climate_for(s));
  const auto corpus =
      weather::generate_corpus(sites, run.cfg.corpus.firstYear, run.cfg.corpus.lastYear, run.cfg.corpus.seed);
  std::ostringstream ss;
  weather::write_weather_csv(ss, corpus);
  run.write_path(target, target.string(), ss.str());
}

void stage_train_weather(Run& run) {
  const auto corpus = weather::load_weather_csv(run.need_external(run.cfg.paths.weatherCorpus, "weather corpus"));
  weather::WeatherModel model;
  auto th = weather::AeHyper::temprad_defaults();
  th.maxEpochs = run.cfg.weather.tempRadEpochs;
  th.seed = stage_seed(run.cfg, kSeedTempRadAe);
  model.tempRad = weather::train_temprad_ae(corpus, th);
  auto rh = weather::AeHyper::rain_defaults();
  rh.maxEpochs = run.cfg.weather.rainEpochs;
  rh.seed = stage_seed(run.cfg, kSeedRainAe);
  model.rain = weather::train_rain_ae(corpus, rh);

  const fs::path mp = run.out / artifact::kWeatherModel;
  weather::save_weather_model(model, mp);
  run.outputs[artifact::kWeatherModel] = file_checksum(mp);

  const auto recon = model.decode(model.encode(corpus), corpus);
  json j;
  j["series"] = corpus.size();
  j["reconstruction"] = recon_json(weather::reconstruction_metrics(corpus, recon));
  j["tempRadFinalLoss"] = model.tempRad.epochLoss.back();
  j["rainFinalLoss"] = model.rain.epochLoss.back();
  run.write_json(artifact::kWeatherMetrics, j);
}

std::vector<weather::LatentEntry> latent_entries(const std::vector<weather::WeatherSeries>& corpus,
                                                 const std::vector<weather::LatentCode>& codes) {
  std::vector<weather::LatentEntry> entries;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    entries.push_back({codes[i], corpus[i].location, corpus[i].lat, corpus[i].lon, corpus[i].year});
  }
  return entries;
}

void stage_synth_weather(Run& run) {
  const auto model = weather::load_weather_model(run.need(artifact::kWeatherModel, Stage::TrainWeather));
  const auto corpus = weather::load_weather_csv(run.need_external(run.cfg.paths.weatherCorpus, "weather corpus"));
  const weather::LatentIndex index(latent_entries(corpus, model.encode(corpus)), run.cfg.weather.latitudeWeight);
  weather::SynthOptions opts;
  opts.count = run.cfg.weather.synthCount;
  opts.k = run.cfg.weather.k;
  opts.sameLocation = run.cfg.weather.sameLocation;
  opts.seed = stage_seed(run.cfg, kSeedSynth);
  const auto samples = weather::synth_generate(index, model, opts);

  std::vector<weather::WeatherSeries> series;
  for (const auto& s : samples) series.push_back(s.series);
  run.write_with(artifact::kSynthWeather, [&](std::ostream& o) { weather::write_weather_csv(o, series, true); });
  run.write_with(artifact::kSynthCodes, [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("weather").field("anchor");
    for (std::size_t k = 0; k < weather::kLatentDims; ++k) {
      w.field((k < cropsim::kTempRadLatent ? "t" + std::to_string(k)
                                           : "r" + std::to_string(k - cropsim::kTempRadLatent)));
    }
    w.end_row();
    for (const auto& s : samples) {
      w.field(cropsim::weather_key(s.series)).field(s.anchor);
      for (double v : weather::flatten(s.code)) w.field(v);
      w.end_row();
    }
  });
}

void stage_simulate(Run& run) {
  std::vector<sampling::DesignPoint> design;
  {
    std::ifstream in(run.need(artifact::kDesign, Stage::Design));
    design = sampling::read_design_csv(in, artifact::kDesign);
  }
  const auto series = weather::load_weather_csv(run.need(artifact::kSynthWeather, Stage::SynthWeather));
  const auto codes = csv::read_file(run.need(artifact::kSynthCodes, Stage::SynthWeather));
  if (series.empty()) throw InputError("synthetic weather file is empty");
  if (codes.rows.size() != series.size()) throw InputError("synthetic codes and weather differ in length");
  const std::size_t keyCol = codes.column("weather");
  std::vector<std::size_t> latentCols;
  for (std::size_t k = 0; k < weather::kLatentDims; ++k) {
    latentCols.push_back(codes.column(k < cropsim::kTempRadLatent
                                          ? "t" + std::to_string(k)
                                          : "r" + std::to_string(k - cropsim::kTempRadLatent)));
  }

  std::vector<cropsim::DatasetRow> rows(design.size());
  std::vector<cropsim::SimJob> jobs(design.size());
  for (std::size_t i = 0; i < design.size(); ++i) {
    // A prime stride spreads consecutive Sobol points over the series.
    const std::size_t s = (i * 7919) % series.size();
    if (codes.rows[s][keyCol] != cropsim::weather_key(series[s])) {
      throw InputError("synthetic codes row " + std::to_string(s) + " does not match its series");
    }
    auto& r = rows[i];
    r.id = design[i].sobolIndex;
    r.location = series[s].location;
    r.lat = series[s].lat;
    r.weatherKey = cropsim::weather_key(series[s]);
    r.config = design[i].config;
    for (std::size_t k = 0; k < weather::kLatentDims; ++k) r.latent[k] = codes.number(s, latentCols[k]);
    jobs[i] = {design[i].config, &series[s], &oracle_soil(run.cfg, series[s].location)};
  }
  const auto outs = cropsim::run_batch(jobs);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].outputs = outs[i];
  run.write_with(artifact::kDataset, [&](std::ostream& o) { cropsim::write_dataset_csv(o, rows); });
}

void stage_train_emulator(Run& run) {
  const auto space = space_of(run.cfg);
  const auto ds = load_split_dataset(run, space);
  auto hyper = run.cfg.emulator.hyper;
  hyper.seed = stage_seed(run.cfg, kSeedEmulator);
  const auto em = emulator::train_emulator(ds, hyper);
  const fs::path p = run.out / artifact::kEmulator;
  emulator::save_emulator(em, p);
  run.outputs[artifact::kEmulator] = file_checksum(p);
  json j;
  j["trainRows"] = ds.rows(emulator::Split::Train).size();
  j["testRows"] = ds.rows(emulator::Split::Test).size();
  j["train"] = regression_json(emulator::evaluate(em, ds, emulator::Split::Train));
  j["test"] = regression_json(emulator::evaluate(em, ds, emulator::Split::Test));
  j["epochLoss"] = em.epochLoss;
  run.write_json(artifact::kEmulatorMetrics, j);
}

void stage_swag(Run& run) {
  const auto space = space_of(run.cfg);
  const auto em = emulator::load_emulator(run.need(artifact::kEmulator, Stage::TrainEmulator));
  const auto ds = load_split_dataset(run, space);
  auto sc = run.cfg.swag;
  sc.seed = stage_seed(run.cfg, kSeedSwag);
  const auto post = swag::finetune_collect(em, ds.features, ds.targets, ds.rows(emulator::Split::Train), sc);
  const fs::path p = run.out / artifact::kPosterior;
  swag::save_posterior(post, sc, p);
  run.outputs[artifact::kPosterior] = file_checksum(p);
}

void stage_evaluate(Run& run) {
  const auto space = space_of(run.cfg);
  const auto em = emulator::load_emulator(run.need(artifact::kEmulator, Stage::TrainEmulator));
  const auto post = swag::load_posterior(run.need(artifact::kPosterior, Stage::Swag));
  const auto ds = load_split_dataset(run, space);
  const auto test = ds.rows(emulator::Split::Test);
  const nn::Tensor x = ds.features.gather_rows(test);
  const nn::Tensor y = ds.targets.gather_rows(test);
  const auto preds = swag::ensemble_predict(post, em, x, run.cfg.swag.sampleCount, bn_subset(ds, run.cfg),
                                            stage_seed(run.cfg, kSeedEnsemble));

  nn::Tensor mean({test.size(), ds.targets.shape[1]});
  for (std::size_t r = 0; r < test.size(); ++r)
    std::copy(preds[r].mean.begin(), preds[r].mean.end(), mean.values.begin() + r * mean.shape[1]);
  const auto point = emulator::regression_metrics(em.scaler.targets.transform(mean), em.scaler.targets.transform(y),
                                                  ds.targetNames);
  const auto cal = swag::calibration_metrics(preds, y, em.scaler.targets.stds);

  json per = json::array();
  double pooled = 0;
  for (std::size_t c = 0; c < cal.perOutput.size(); ++c) {
    const auto& o = cal.perOutput[c];
    pooled += o.coverage95 / static_cast<double>(cal.perOutput.size());
    per.push_back({{"name", ds.targetNames[c]},
                   {"coverage95", o.coverage95},
                   {"meanIntervalWidth", o.meanIntervalWidth},
                   {"meanVariance", o.meanVariance}});
  }
  json j;
  j["testRows"] = test.size();
  j["sampleCount"] = run.cfg.swag.sampleCount;
  j["ensembleMean"] = regression_json(point);
  j["calibration"] = {{"perOutput", per}, {"pooledCoverage95", pooled}, {"corrVarSqErr", opt(cal.corrVarSqErr)}};
  run.write_json(artifact::kEvaluation, j);

  std::vector<std::uint64_t> ids;
  std::vector<std::string> tags;
  {
    const auto rows = read_dataset(run.out / artifact::kDataset);
    for (std::size_t r : test) {
      ids.push_back(rows[r].id);
      tags.push_back(rows[r].location);
    }
  }
  run.write_with(artifact::kTestPredictions,
                 [&](std::ostream& o) { swag::write_predictions_csv(o, preds, ids, tags, ds.targetNames); });
}

// Weather and encoded features of one discovery environment.
struct EnvCase {
  discovery::Environment env;
  weather::WeatherSeries series;
  weather::WeatherSeries decoded;  // what the emulator sees through the latent code
  emulator::WeatherFeatures features;
  const cropsim::SoilProfile* soil = nullptr;
};

std::vector<EnvCase> build_environments(const RunConfig& cfg, const std::vector<weather::WeatherSeries>& corpus,
                                        const weather::WeatherModel& model) {
  std::vector<EnvCase> cases;
  for (const auto& env : discovery_environments(cfg.discovery)) {
    const int year = cfg.discovery.baseYear - env.variant;
    const auto it = std::find_if(corpus.begin(), corpus.end(), [&](const weather::WeatherSeries& s) {
      return s.location == env.location && s.year == year;
    });
    if (it == corpus.end()) {
      throw InputError("discovery: weather corpus has no " + env.location + " series for " + std::to_string(year));
    }
    EnvCase c;
    c.env = env;
    c.series = weather::scenario_perturb(*it, weather::scenario_preset(env.scenario),
                                         stage_seed(cfg, kSeedPerturb + static_cast<std::uint64_t>(env.variant)));
    c.soil = &cropsim::county_soil(env.location);
    cases.push_back(std::move(c));
  }
  std::vector<weather::WeatherSeries> series;
  for (const auto& c : cases) series.push_back(c.series);
  const auto codes = model.encode(series);
  const auto decoded = model.decode(codes, series);
  for (std::size_t e = 0; e < cases.size(); ++e) {
    cases[e].decoded = decoded[e];
    const auto flat = weather::flatten(codes[e]);
    std::copy(flat.begin(), flat.end(), cases[e].features.latent.begin());
    cases[e].features.lat = cases[e].series.lat;
  }
  return cases;
}

void stage_discover(Run& run) {
  const RunConfig& cfg = run.cfg;
  const DiscoveryConfig& dc = cfg.discovery;
  const auto space = space_of(cfg);
  const auto post = swag::load_posterior(run.need(artifact::kPosterior, Stage::Swag));
  const auto em = emulator::load_emulator(run.need(artifact::kEmulator, Stage::TrainEmulator));
  const auto model = weather::load_weather_model(run.need(artifact::kWeatherModel, Stage::TrainWeather));
  const auto ds = load_split_dataset(run, space);
  const auto corpus = weather::load_weather_csv(run.need_external(cfg.paths.weatherCorpus, "weather corpus"));
  const auto envs = build_environments(cfg, corpus, model);
  const std::size_t nEnv = envs.size();

  const auto design = sampling::design_batch(space, dc.configCount, cfg.sampling.skip + cfg.sampling.count);
  const std::size_t nCfg = design.size();
  const auto genetic = genetic_variables(space);
  const std::size_t width = em.featureNames.size();
  constexpr std::size_t yieldOut = cropsim::GrainTotalWt;

  // Environment-major feature grid.
  std::map<std::string, std::vector<sampling::TraitConfig>> localized;
  for (const auto& e : envs) {
    auto& v = localized[e.env.location];
    if (!v.empty()) continue;
    for (const auto& d : design) v.push_back(localize_config(space, d.config, *e.soil, dc.management));
  }
  nn::Tensor grid({nEnv * nCfg, width});
  for (std::size_t e = 0; e < nEnv; ++e) {
    const auto& cfgs = localized.at(envs[e].env.location);
    for (std::size_t i = 0; i < nCfg; ++i) {
      const auto row = emulator::feature_row(space, cfgs[i], envs[e].features);
      std::copy(row.begin(), row.end(), grid.values.begin() + (e * nCfg + i) * width);
    }
  }
  const auto members =
      swag::sample_ensemble(post, em, dc.sampleCount, bn_subset(ds, cfg), stage_seed(cfg, kSeedEnsemble));
  const auto preds = swag::predict_ensemble(members, em, grid);

  discovery::PredictionTable table;
  table.rows.reserve(preds.size());
  for (std::size_t e = 0; e < nEnv; ++e)
    for (std::size_t i = 0; i < nCfg; ++i)
      table.rows.push_back({design[i].sobolIndex, envs[e].env.key(), preds[e * nCfg + i]});
  const auto tags = table.env_tags();
  const auto ranking = swag::rank_env_uncertainty(preds, tags, yieldOut);
  const swag::CvFilterConfig cvCfg{dc.cvDefault, dc.cvRelaxed, dc.relaxedEnvCount, yieldOut};
  const auto mask = swag::cv_filter(preds, tags, cvCfg, ranking);
  const auto top = discovery::rank_topk_per_env(table, dc.topK, yieldOut);
  const auto result = discovery::intersect_resilient(top, discovery::retained_by_env(table, mask), nCfg);

  std::map<std::uint64_t, std::size_t> slot;
  for (std::size_t i = 0; i < nCfg; ++i) slot[design[i].sobolIndex] = i;
  std::vector<std::string> traitNames;
  for (std::size_t v : genetic) traitNames.push_back(space.variables[v].name);

  const std::size_t nRes = result.resilientIds.size();
  nn::Tensor traits({nRes, genetic.size()});
  std::vector<std::vector<double>> yields(nRes, std::vector<double>(nEnv));
  for (std::size_t r = 0; r < nRes; ++r) {
    const std::size_t i = slot.at(result.resilientIds[r]);
    for (std::size_t g = 0; g < genetic.size(); ++g)
      traits.values[r * genetic.size() + g] = sampling::get_value(design[i].config, genetic[g]);
    for (std::size_t e = 0; e < nEnv; ++e) yields[r][e] = preds[e * nCfg + i].mean[yieldOut];
  }
  std::vector<std::string> envLocations, envKeys;
  for (const auto& e : envs) {
    envLocations.push_back(e.env.location);
    envKeys.push_back(e.env.key());
  }

  json j;
  j["configCount"] = nCfg;
  j["environmentCount"] = nEnv;
  j["environments"] = envKeys;
  j["topK"] = dc.topK;
  j["envUncertaintyRanking"] = ranking;
  j["cvRetainedFraction"] =
      static_cast<double>(std::count(mask.begin(), mask.end(), true)) / static_cast<double>(mask.size());
  j["resilientIds"] = result.resilientIds;
  j["resilientCount"] = nRes;
  j["fractionOfSpace"] = result.fractionOfSpace;
  j["fractionText"] = discovery::format_fraction_percent(result.fractionOfSpace);
  j["traitNames"] = traitNames;

  std::vector<std::size_t> assignment(nRes, 0);
  json clusters = json::array();
  json best = json::object();
  if (nRes >= dc.clusters) {
    const auto km = discovery::kmeans_cluster(traits, {dc.clusters, dc.restarts, 300, stage_seed(cfg, kSeedKMeans)});
    assignment = km.assignment;
    const auto summary = discovery::summarize_clusters(km, traits, traitNames, yields, envLocations);
    for (std::size_t c = 0; c < summary.clusters.size(); ++c) {
      const auto& p = summary.clusters[c];
      json means = json::object();
      for (std::size_t g = 0; g < traitNames.size(); ++g) means[traitNames[g]] = p.traitMeans[g];
      clusters.push_back(
          {{"id", c}, {"size", p.size}, {"traitMeans", means}, {"yieldMean", p.yieldMean}, {"yieldStd", p.yieldStd}});
    }
    for (const auto& [loc, c] : summary.bestClusterPerLocation) best[loc] = c;
    j["clusterSse"] = km.sse;
  } else {
    log_warning("discovery: " + std::to_string(nRes) + " resilient configs, fewer than " +
                std::to_string(dc.clusters) + " clusters; clustering skipped");
  }
  j["clusters"] = clusters;
  j["bestClusterPerLocation"] = best;

  json pcaJson = nullptr;
  std::string pcaCsv;
  if (nRes >= 2) {
    const auto pca = discovery::pca_project(traits, 2);
    pcaJson = {{"explained", pca.explained}, {"loadings", pca.loadings}};
    std::ostringstream ss;
    csv::Writer w(ss);
    w.field("id").field("pc1").field("pc2").field("cluster").end_row();
    for (std::size_t r = 0; r < nRes; ++r) {
      w.field(static_cast<std::size_t>(result.resilientIds[r]))
          .field(pca.coordinates.values[r * 2])
          .field(pca.coordinates.values[r * 2 + 1])
          .field(assignment[r])
          .end_row();
    }
    pcaCsv = ss.str();
  } else {
    pcaCsv = "id,pc1,pc2,cluster\n";
  }
  j["pca"] = pcaJson;

  // Permutation importance per location: the ensemble mean scored against
  // oracle yields on the decoded environment weather, the ground truth the
  // emulator was trained to reproduce for that latent code.
  const std::size_t nImp = std::min(dc.importanceConfigs, nCfg);
  json importance = json::array();
  std::ostringstream impCsv;
  csv::Writer iw(impCsv);
  iw.field("location").field("variable").field("percent").field("drop").field("drop_std").field("rank").end_row();
  for (std::size_t li = 0; li < dc.locations.size(); ++li) {
    const std::string& loc = dc.locations[li];
    std::vector<std::size_t> locEnvs;
    for (std::size_t e = 0; e < nEnv; ++e)
      if (envs[e].env.location == loc) locEnvs.push_back(e);
    const auto& cfgs = localized.at(loc);
    const std::size_t n = nImp * locEnvs.size();
    nn::Tensor x({n, genetic.size()});
    nn::Tensor base({n, width});
    std::vector<cropsim::SimJob> jobs(n);
    for (std::size_t a = 0; a < locEnvs.size(); ++a) {
      const auto& ec = envs[locEnvs[a]];
      for (std::size_t i = 0; i < nImp; ++i) {
        const std::size_t r = a * nImp + i;
        for (std::size_t g = 0; g < genetic.size(); ++g)
          x.values[r * genetic.size() + g] = sampling::get_value(cfgs[i], genetic[g]);
        std::copy(grid.values.begin() + (locEnvs[a] * nCfg + i) * width,
                  grid.values.begin() + (locEnvs[a] * nCfg + i + 1) * width, base.values.begin() + r * width);
        jobs[r] = {cfgs[i], &ec.decoded, ec.soil};
      }
    }
    const auto oracle = cropsim::run_batch(jobs);
    std::vector<double> target(n);
    for (std::size_t r = 0; r < n; ++r) target[r] = oracle[r][yieldOut];

    // Genetic features occupy their free-variable slots in the feature row.
    const auto free = space.free_indices();
    std::vector<std::size_t> featureSlot;
    for (std::size_t v : genetic)
      featureSlot.push_back(static_cast<std::size_t>(std::find(free.begin(), free.end(), v) - free.begin()));
    const discovery::Predictor predictor = [&](const nn::Tensor& t) {
      nn::Tensor full = base;
      for (std::size_t r = 0; r < t.batch(); ++r)
        for (std::size_t g = 0; g < featureSlot.size(); ++g)
          full.values[r * width + featureSlot[g]] = t.values[r * featureSlot.size() + g];
      const auto p = swag::predict_ensemble(members, em, full);
      std::vector<double> out(p.size());
      for (std::size_t r = 0; r < p.size(); ++r) out[r] = p[r].mean[yieldOut];
      return out;
    };
    const double baseline = discovery::r2_score(predictor(x), target);
    const auto imp = discovery::permutation_importance(predictor, x, target, traitNames, dc.importanceRepeats,
                                                       derive_seed(stage_seed(cfg, kSeedImportance), li));
    json vars = json::array();
    for (const auto& v : imp) {
      vars.push_back(
          {{"name", v.name}, {"percent", v.percent}, {"drop", v.drop}, {"dropStd", v.dropStd}, {"rank", v.rank}});
      iw.field(loc).field(v.name).field(v.percent).field(v.drop).field(v.dropStd).field(v.rank).end_row();
    }
    importance.push_back({{"location", loc}, {"rows", n}, {"baselineR2", baseline}, {"variables", vars}});
  }
  j["importance"] = importance;

  run.write_with(artifact::kEnvironments, [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("environment").field("location").field("scenario").field("variant").field("year");
    for (std::size_t k = 0; k < weather::kLatentDims; ++k) w.field("z" + std::to_string(k));
    w.end_row();
    for (const auto& e : envs) {
      w.field(e.env.key()).field(e.env.location).field(e.env.scenario).field(e.env.variant);
      w.field(cfg.discovery.baseYear - e.env.variant);
      for (double v : e.features.latent) w.field(v);
      w.end_row();
    }
  });
  run.write_with(artifact::kDiscoveryPredictions, [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("id").field("environment").field("yield_mean").field("yield_std").field("yield_cv").field("cv_retained");
    w.end_row();
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
      const auto& r = table.rows[k];
      w.field(static_cast<std::size_t>(r.configId)).field(r.environment);
      w.field(r.prediction.mean[yieldOut]).field(std::sqrt(r.prediction.variance[yieldOut]));
      w.field(r.prediction.cv[yieldOut]).field(mask[k] ? 1 : 0).end_row();
    }
  });
  run.write_with(artifact::kResilient, [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("id").field("cluster");
    for (const auto& t : traitNames) w.field(t);
    w.field("yield_mean").end_row();
    for (std::size_t r = 0; r < nRes; ++r) {
      w.field(static_cast<std::size_t>(result.resilientIds[r])).field(assignment[r]);
      for (std::size_t g = 0; g < genetic.size(); ++g) w.field(traits.values[r * genetic.size() + g]);
      double m = 0;
      for (double y : yields[r]) m += y / static_cast<double>(nEnv);
      w.field(m).end_row();
    }
  });
  run.write_with(artifact::kClusters, [&](std::ostream& o) {
    csv::Writer w(o);
    w.field("cluster").field("size");
    for (const auto& t : traitNames) w.field(t);
    w.field("yield_mean").field("yield_std").end_row();
    for (const auto& c : clusters) {
      w.field(c["id"].get<std::size_t>()).field(c["size"].get<std::size_t>());
      for (const auto& t : traitNames) w.field(c["traitMeans"][t].get<double>());
      w.field(c["yieldMean"].get<double>()).field(c["yieldStd"].get<double>()).end_row();
    }
  });
  run.write(artifact::kImportance, impCsv.str());
  run.write(artifact::kPca, pcaCsv);
  run.write_json(artifact::kDiscovery, j);
}

void stage_report(Run& run) {
  const json weatherJ = read_json(run.need(artifact::kWeatherMetrics, Stage::TrainWeather));
  const json emJ = read_json(run.need(artifact::kEmulatorMetrics, Stage::TrainEmulator));
  const json evalJ = read_json(run.need(artifact::kEvaluation, Stage::Evaluate));
  const json discJ = read_json(run.need(artifact::kDiscovery, Stage::Discover));

  json r;
  r["schemaVersion"] = "1.0";
  r["configHash"] = config_hash(run.cfg);
  r["seed"] = run.cfg.seed;
  r["weather"] = {{"series", weatherJ["series"]}, {"reconstruction", weatherJ["reconstruction"]}};
  r["emulator"] = {{"trainRows", emJ["trainRows"]},
                   {"testRows", emJ["testRows"]},
                   {"train", emJ["train"]},
                   {"test", emJ["test"]}};
  r["uncertainty"] = evalJ;
  json d = discJ;
  d["pcaCoordinatesCsv"] = artifact::kPca;
  r["discovery"] = d;
  json arts = json::object();
  for (const auto& [name, sum] : run.inputs) arts[name] = sum;
  r["artifacts"] = arts;
  run.write_json(artifact::kReport, r);
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::Design: return "design";
    case Stage::GenCorpus: return "gen-corpus";
    case Stage::TrainWeather: return "train-weather";
    case Stage::SynthWeather: return "synth-weather";
    case Stage::Simulate: return "simulate";
    case Stage::TrainEmulator: return "train-emulator";
    case Stage::Swag: return "swag";
    case Stage::Evaluate: return "evaluate";
    case Stage::Discover: return "discover";
    case Stage::Report: return "report";
  }
  return "?";
}

std::vector<Stage> pipeline_stages() {
  return {Stage::Design,        Stage::TrainWeather, Stage::SynthWeather, Stage::Simulate, Stage::TrainEmulator,
          Stage::Swag,          Stage::Evaluate,     Stage::Discover,     Stage::Report};
}

void run_stage(Stage stage, const RunConfig& cfg, const fs::path& corpusOut) {
  Run run{cfg, stage, cfg.paths.outputDir, {}, {}};
  fs::create_directories(run.out);
  log_info(std::string("stage ") + stage_name(stage));
  switch (stage) {
    case Stage::Design: stage_design(run); break;
    case Stage::GenCorpus:
      stage_gen_corpus(run, corpusOut.empty() ? run.out / artifact::kCorpus : corpusOut);
      break;
    case Stage::TrainWeather: stage_train_weather(run); break;
    case Stage::SynthWeather: stage_synth_weather(run); break;
    case Stage::Simulate: stage_simulate(run); break;
    case Stage::TrainEmulator: stage_train_emulator(run); break;
    case Stage::Swag: stage_swag(run); break;
    case Stage::Evaluate: stage_evaluate(run); break;
    case Stage::Discover: stage_discover(run); break;
    case Stage::Report: stage_report(run); break;
  }
  run.finish();
}

void run_all(const RunConfig& cfg) {
  for (Stage s : pipeline_stages()) run_stage(s, cfg);
}

std::vector<std::size_t> genetic_variables(const sampling::ParamSpace& space) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < space.variables.size(); ++v)
    if (space.variables[v].group == sampling::VariableGroup::Genetic) out.push_back(v);
  return out;
}

namespace {

double snap(const sampling::VariableDef& v, double value) {
  using sampling::VariableKind;
  if (v.kind == VariableKind::Continuous) return std::clamp(value, v.lowerBound, v.upperBound);
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.cell_count(); ++i)
    if (std::abs(v.cell_value(i) - value) < std::abs(v.cell_value(best) - value)) best = i;
  return v.cell_value(best);
}

}  // namespace

sampling::TraitConfig localize_config(const sampling::ParamSpace& space, sampling::TraitConfig cfg,
                                      const cropsim::SoilProfile& soil, const ManagementConfig& management) {
  using namespace sampling;
  int texture = 0;
  double bestDist = INFINITY;
  for (int t = 0; t < 3; ++t) {
    const auto& s = soil_texture(t);
    const double d = std::hypot(s.ll15 - soil.ll15, s.dul - soil.dul);
    if (d < bestDist) {
      bestDist = d;
      texture = t;
    }
  }
  set_value(cfg, DUL, texture);
  set_value(cfg, Carbon, snap(space.at(Carbon), soil.carbon));
  set_value(cfg, InitialValues, snap(space.at(InitialValues), soil.initialWaterPercent));
  set_value(cfg, FInert, snap(space.at(FInert), soil.fInert));
  set_value(cfg, CN2Bare, snap(space.at(CN2Bare), soil.cn2));
  set_value(cfg, FOM, 0);
  set_value(cfg, Population, snap(space.at(Population), management.population));
  set_value(cfg, StartDate, snap(space.at(StartDate), management.startDate));
  set_value(cfg, FertilizeAtSowing, snap(space.at(FertilizeAtSowing), management.fertilizeAtSowing));
  return cfg;
}

std::vector<discovery::Environment> discovery_environments(const DiscoveryConfig& cfg) {
  std::vector<discovery::Environment> envs;
  for (const auto& loc : cfg.locations) {
    cropsim::county_soil(loc);
    for (const auto& sc : cfg.scenarios) {
      weather::scenario_preset(sc);
      for (std::size_t v = 0; v < cfg.variants; ++v) envs.push_back({loc, sc, static_cast<int>(v)});
    }
  }
  return envs;
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

}  // namespace cropemu::pipeline
