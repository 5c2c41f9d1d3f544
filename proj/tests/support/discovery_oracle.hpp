#pragma once

// Oracle-scored prediction grids and a deliberately naive resilient-set
// computation (pairwise dominance counts, no sorting) used to cross-check
// the discovery ranking and intersection code.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cropemu/cropsim/simulator.hpp"
#include "cropemu/cropsim/soil.hpp"
#include "cropemu/discovery/ranking.hpp"
#include "cropemu/random.hpp"
#include "cropemu/sampling/param_space.hpp"
#include "cropemu/swag/ensemble.hpp"
#include "cropemu/weather/corpus.hpp"

namespace cropemu::testing {

// configs x 4 environments (two counties, two years), means from the
// simulator, cv drawn per cell from [0, 0.9).
inline discovery::PredictionTable oracle_grid(std::uint64_t seed, std::size_t configs = 500) {
  const auto space = sampling::default_param_space();
  const auto design = sampling::design_batch(space, configs, 1 + seed * configs);
  const auto corpus = weather::generate_corpus(
      {weather::site_climate_for("Randolph"), weather::site_climate_for("Bremer")}, 2019, 2020, seed);
  discovery::PredictionTable table;
  for (const auto& series : corpus) {
    const std::string env = series.location + "/y" + std::to_string(series.year) + "/0";
    const auto& soil = cropsim::county_soil(series.location);
    for (const auto& point : design) {
      const auto out = cropsim::simulate(point.config, series, soil);
      swag::EnsemblePrediction p;
      Rng rng(derive_seed(seed, point.sobolIndex * 7 + static_cast<std::uint64_t>(series.year)));
      for (double v : out.values) {
        const double cv = 0.9 * uniform01(rng);
        const double sd = cv * std::abs(v);
        p.mean.push_back(v);
        p.variance.push_back(sd * sd);
        p.lower.push_back(v - 1.96 * sd);
        p.upper.push_back(v + 1.96 * sd);
        p.cv.push_back(cv);
      }
      table.rows.push_back({point.sobolIndex, env, p});
    }
  }
  return table;
}

inline std::vector<std::uint64_t> brute_force_resilient(const discovery::PredictionTable& table, std::size_t k,
                                                        std::size_t output, const swag::CvFilterConfig& cvCfg) {
  std::set<std::string> envs;
  std::set<std::uint64_t> ids;
  for (const auto& r : table.rows) {
    envs.insert(r.environment);
    ids.insert(r.configId);
  }
  // Mean cv per environment, then the number of environments strictly more
  // uncertain (name breaks ties) decides whether the relaxed threshold applies.
  std::map<std::string, double> envCv;
  std::map<std::string, double> envCount;
  for (const auto& r : table.rows) {
    envCv[r.environment] += r.prediction.cv[cvCfg.output];
    envCount[r.environment] += 1;
  }
  for (auto& [e, v] : envCv) v /= envCount[e];
  std::set<std::uint64_t> result(ids.begin(), ids.end());
  for (const auto& env : envs) {
    std::size_t above = 0;
    for (const auto& other : envs)
      if (envCv[other] > envCv[env] || (envCv[other] == envCv[env] && other < env)) ++above;
    const double limit = above < cvCfg.relaxedEnvCount ? cvCfg.relaxedThreshold : cvCfg.defaultThreshold;
    std::set<std::uint64_t> passing;
    for (const auto& a : table.rows) {
      if (a.environment != env) continue;
      std::size_t better = 0;
      for (const auto& b : table.rows) {
        if (b.environment != env || b.configId == a.configId) continue;
        const double ma = a.prediction.mean[output], mb = b.prediction.mean[output];
        const double ca = a.prediction.cv[output], cb = b.prediction.cv[output];
        if (mb > ma || (mb == ma && cb < ca) || (mb == ma && cb == ca && b.configId < a.configId)) ++better;
      }
      if (better < k && a.prediction.cv[cvCfg.output] <= limit) passing.insert(a.configId);
    }
    std::set<std::uint64_t> next;
    for (auto id : result)
      if (passing.count(id)) next.insert(id);
    result = std::move(next);
  }
  return {result.begin(), result.end()};
}

inline discovery::ResilienceResult library_resilient(const discovery::PredictionTable& table, std::size_t k,
                                                     std::size_t output, const swag::CvFilterConfig& cvCfg) {
  std::vector<swag::EnsemblePrediction> preds;
  for (const auto& r : table.rows) preds.push_back(r.prediction);
  const auto tags = table.env_tags();
  const auto ranking = swag::rank_env_uncertainty(preds, tags, cvCfg.output);
  const auto mask = swag::cv_filter(preds, tags, cvCfg, ranking);
  const auto top = discovery::rank_topk_per_env(table, k, output);
  return discovery::intersect_resilient(top, discovery::retained_by_env(table, mask), table.config_ids().size());
}

}  // namespace cropemu::testing
