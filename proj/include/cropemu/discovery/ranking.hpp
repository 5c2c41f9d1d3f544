#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropemu/swag/ensemble.hpp"

namespace cropemu::discovery {

// A location under one climate scenario and one perturbation variant
// (standing in for a climate model).
struct Environment {
  std::string location;
  std::string scenario;
  int variant = 0;

  std::string key() const;  // "location/scenario/variant"
  bool operator==(const Environment&) const = default;
};

struct PredictionRow {
  std::uint64_t configId = 0;
  std::string environment;  // Environment::key()
  swag::EnsemblePrediction prediction;
};

// Ensemble predictions over a (config x environment) grid.
struct PredictionTable {
  std::vector<PredictionRow> rows;

  std::vector<std::uint64_t> config_ids() const;      // sorted, unique
  std::vector<std::string> environments() const;      // sorted, unique
  std::vector<std::string> env_tags() const;          // per row
  // Throws InputError listing (up to ten) missing or duplicated cells.
  void check_complete() const;
};

using TopK = std::map<std::string, std::vector<std::uint64_t>>;  // env -> sorted ids

// Per environment, the ids of the k largest predicted means of `output`.
// Ties go to the smaller cv, then the smaller id. Throws InputError on an
// incomplete grid or k above the configs per environment.
TopK rank_topk_per_env(const PredictionTable& table, std::size_t k, std::size_t output);

// env -> ids whose row passed the cv filter. mask is aligned with table.rows.
std::map<std::string, std::vector<std::uint64_t>> retained_by_env(const PredictionTable& table,
                                                                  const std::vector<bool>& mask);

struct ResilienceResult {
  std::vector<std::uint64_t> resilientIds;  // sorted
  double fractionOfSpace = 0;
  TopK perEnvTopK;
};

// A config is resilient when it is in the top-k and cv-retained in every
// environment. Environments missing from `retained` retain nothing.
ResilienceResult intersect_resilient(const TopK& perEnvTopK,
                                     const std::map<std::string, std::vector<std::uint64_t>>& retained,
                                     std::size_t totalConfigs);

// Percentage text with two significant figures, e.g. 0.00181 -> "0.18%".
std::string format_fraction_percent(double fraction);

}  // namespace cropemu::discovery
