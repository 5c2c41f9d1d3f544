#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cropemu/discovery/ranking.hpp"
#include "cropemu/pipeline/config.hpp"
#include "cropemu/sampling/param_space.hpp"
#include "cropemu/cropsim/soil.hpp"

namespace cropemu::pipeline {

enum class Stage {
  Design,
  GenCorpus,
  TrainWeather,
  SynthWeather,
  Simulate,
  TrainEmulator,
  Swag,
  Evaluate,
  Discover,
  Report
};

const char* stage_name(Stage stage);
// Stages run by `all`, in order (GenCorpus excluded).
std::vector<Stage> pipeline_stages();

// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kDesign = "design.csv";
inline constexpr const char* kParamSpace = "param_space.txt";
inline constexpr const char* kWeatherModel = "weather_model.bin";
inline constexpr const char* kWeatherMetrics = "weather_metrics.json";
inline constexpr const char* kSynthWeather = "synthetic_weather.csv";
inline constexpr const char* kSynthCodes = "synthetic_codes.csv";
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kEmulator = "emulator.bin";
inline constexpr const char* kEmulatorMetrics = "emulator_metrics.json";
inline constexpr const char* kPosterior = "swag_posterior.bin";
inline constexpr const char* kTestPredictions = "test_predictions.csv";
inline constexpr const char* kEvaluation = "evaluation.json";
inline constexpr const char* kEnvironments = "environments.csv";
inline constexpr const char* kDiscoveryPredictions = "discovery_predictions.csv";
inline constexpr const char* kResilient = "resilient.csv";
inline constexpr const char* kClusters = "clusters.csv";
inline constexpr const char* kImportance = "importance.csv";
inline constexpr const char* kPca = "pca.csv";
inline constexpr const char* kDiscovery = "discovery.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kCorpus = "corpus.csv";
}  // namespace artifact

// Runs one stage, writing its artifacts under cfg.paths.outputDir and
// recording them in the manifest. A missing upstream artifact raises
// InputError naming the stage that produces it. gen-corpus writes to
// `corpusOut` when given, else <outputDir>/corpus.csv.
void run_stage(Stage stage, const RunConfig& cfg, const std::filesystem::path& corpusOut = {});
void run_all(const RunConfig& cfg);

// The 12 genetic variables, the ones discovery varies.
std::vector<std::size_t> genetic_variables(const sampling::ParamSpace& space);

// A discovery config at a location: environmental variables from the county
// soil (texture by nearest (LL15, DUL) pair, other values snapped into the
// design ranges), management fixed and FOM set to soybean residue.
sampling::TraitConfig localize_config(const sampling::ParamSpace& space, sampling::TraitConfig cfg,
                                      const cropsim::SoilProfile& soil, const ManagementConfig& management);

std::vector<discovery::Environment> discovery_environments(const DiscoveryConfig& cfg);

// FNV-1a 64 of a file's bytes as hex.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace cropemu::pipeline
