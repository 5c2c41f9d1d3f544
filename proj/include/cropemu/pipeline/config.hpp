#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropemu/emulator/model.hpp"
#include "cropemu/swag/posterior.hpp"

namespace cropemu::pipeline {

struct PathsConfig {
  std::filesystem::path weatherCorpus = "data/synthetic_corpus.csv";
  std::filesystem::path outputDir = "run";
  std::filesystem::path paramSpace;  // empty: built-in space
};

struct CorpusConfig {
  std::vector<std::string> sites{"Randolph", "Logan", "Bremer"};
  int firstYear = 1984;
  int lastYear = 2023;
  std::uint64_t seed = 42;
};

struct SamplingConfig {
  std::size_t count = 20000;
  std::uint64_t skip = 1;
};

struct OracleConfig {
  std::string soil = "county";  // "county" or a county name used everywhere
};

struct WeatherConfig {
  std::size_t tempRadEpochs = 100;
  std::size_t rainEpochs = 100;
  std::size_t synthCount = 600;
  std::size_t k = 5;
  double latitudeWeight = 3.0;
  bool sameLocation = false;
};

struct EmulatorConfig {
  emulator::EmulatorHyper hyper;
  double testFraction = 0.1;
};

struct ManagementConfig {
  double population = 7;
  double startDate = 10;
  double fertilizeAtSowing = 180;
};

struct DiscoveryConfig {
  std::vector<std::string> locations{"Randolph", "Logan", "Bremer"};
  std::vector<std::string> scenarios{"control", "ssp245-like", "ssp585-like"};
  std::size_t variants = 2;
  int baseYear = 2020;
  std::size_t configCount = 4000;
  std::size_t topK = 400;
  std::size_t sampleCount = 30;
  double cvDefault = 0.5;
  double cvRelaxed = 1.0;
  std::size_t relaxedEnvCount = 4;
  std::size_t clusters = 4;
  std::size_t restarts = 10;
  std::size_t importanceConfigs = 500;
  std::size_t importanceRepeats = 5;
  ManagementConfig management;
};

struct RunConfig {
  std::uint64_t seed = 42;
  PathsConfig paths;
  CorpusConfig corpus;
  SamplingConfig sampling;
  OracleConfig oracle;
  WeatherConfig weather;
  EmulatorConfig emulator;
  swag::SwagConfig swag;
  DiscoveryConfig discovery;
};

// Parses and validates a config document. Missing keys keep their defaults;
// unknown keys and wrong types raise ConfigError naming the key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
// Every field, defaults included, with keys in sorted order.
nlohmann::json config_to_json(const RunConfig& cfg);
// FNV-1a 64 of the canonical dump of config_to_json without
// paths.outputDir, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace cropemu::pipeline
