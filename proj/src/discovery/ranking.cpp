#include "cropemu/discovery/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cropemu/error.hpp"

namespace cropemu::discovery {

std::string Environment::key() const { return location + "/" + scenario + "/" + std::to_string(variant); }

std::vector<std::uint64_t> PredictionTable::config_ids() const {
  std::set<std::uint64_t> ids;
  for (const auto& r : rows) ids.insert(r.configId);
  return {ids.begin(), ids.end()};
}

std::vector<std::string> PredictionTable::environments() const {
  std::set<std::string> envs;
  for (const auto& r : rows) envs.insert(r.environment);
  return {envs.begin(), envs.end()};
}

std::vector<std::string> PredictionTable::env_tags() const {
  std::vector<std::string> tags;
  tags.reserve(rows.size());
  for (const auto& r : rows) tags.push_back(r.environment);
  return tags;
}

void PredictionTable::check_complete() const {
  const auto ids = config_ids();
  const auto envs = environments();
  std::set<std::pair<std::string, std::uint64_t>> seen;
  std::vector<std::string> problems;
  for (const auto& r : rows)
    if (!seen.emplace(r.environment, r.configId).second)
      problems.push_back("duplicate " + r.environment + "#" + std::to_string(r.configId));
  std::size_t missing = 0;
  for (const auto& e : envs)
    for (auto id : ids)
      if (!seen.count({e, id})) {
        if (++missing <= 10) problems.push_back("missing " + e + "#" + std::to_string(id));
      }
  if (problems.empty()) return;
  std::string msg = "prediction grid is incomplete (" + std::to_string(missing) + " missing cells):";
  for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 10); ++i) msg += " " + problems[i];
  throw InputError(msg);
}

TopK rank_topk_per_env(const PredictionTable& table, std::size_t k, std::size_t output) {
  table.check_complete();
  std::map<std::string, std::vector<const PredictionRow*>> byEnv;
  for (const auto& r : table.rows) {
    if (output >= r.prediction.mean.size()) throw InputError("ranking output index out of range");
    byEnv[r.environment].push_back(&r);
  }
  TopK top;
  for (auto& [env, rows] : byEnv) {
    if (k > rows.size()) {
      throw InputError("top-k of " + std::to_string(k) + " exceeds the " + std::to_string(rows.size()) +
                       " configs of " + env);
    }
    std::partial_sort(rows.begin(), rows.begin() + static_cast<long>(k), rows.end(),
                      [output](const PredictionRow* a, const PredictionRow* b) {
                        const double ma = a->prediction.mean[output], mb = b->prediction.mean[output];
                        if (ma != mb) return ma > mb;
                        const double ca = a->prediction.cv[output], cb = b->prediction.cv[output];
                        if (ca != cb) return ca < cb;
                        return a->configId < b->configId;
                      });
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < k; ++i) ids.push_back(rows[i]->configId);
    std::sort(ids.begin(), ids.end());
    top[env] = std::move(ids);
  }
  return top;
}

std::map<std::string, std::vector<std::uint64_t>> retained_by_env(const PredictionTable& table,
                                                                  const std::vector<bool>& mask) {
  if (mask.size() != table.rows.size()) throw InputError("cv mask must align with the prediction rows");
  std::map<std::string, std::vector<std::uint64_t>> out;
  for (const auto& e : table.environments()) out[e];
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out[table.rows[i].environment].push_back(table.rows[i].configId);
  for (auto& [env, ids] : out) std::sort(ids.begin(), ids.end());
  return out;
}

ResilienceResult intersect_resilient(const TopK& perEnvTopK,
                                     const std::map<std::string, std::vector<std::uint64_t>>& retained,
                                     std::size_t totalConfigs) {
  ResilienceResult res;
  res.perEnvTopK = perEnvTopK;
  bool first = true;
  std::vector<std::uint64_t> current;
  for (const auto& [env, ids] : perEnvTopK) {
    const auto it = retained.find(env);
    std::vector<std::uint64_t> kept;
    if (it != retained.end())
      std::set_intersection(ids.begin(), ids.end(), it->second.begin(), it->second.end(), std::back_inserter(kept));
    if (first) {
      current = std::move(kept);
      first = false;
    } else {
      std::vector<std::uint64_t> next;
      std::set_intersection(current.begin(), current.end(), kept.begin(), kept.end(), std::back_inserter(next));
      current = std::move(next);
    }
  }
  res.resilientIds = std::move(current);
  res.fractionOfSpace = totalConfigs ? static_cast<double>(res.resilientIds.size()) / static_cast<double>(totalConfigs) : 0.0;
  return res;
}

std::string format_fraction_percent(double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2g%%", fraction * 100.0);
  return buf;
}

}  // namespace cropemu::discovery
