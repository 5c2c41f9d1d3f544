#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropemu/emulator/model.hpp"
#include "cropemu/swag/posterior.hpp"

namespace cropemu::swag {

inline constexpr double kInterval95 = 1.96;
inline constexpr double kCvFloor = 1e-9;

// Per-output ensemble statistics of one input row, in raw units. The 95%
// interval is Gaussian: mean +/- 1.96 sd.
struct EnsemblePrediction {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> cv;  // sd / max(|mean|, 1e-9)
};

// Reduces member predictions (members x rows x outputs, raw units) in
// member order.
std::vector<EnsemblePrediction> summarize_members(const std::vector<nn::Tensor>& members);

// Draws sampleCount weight vectors (seeds derived from `seed`), refreshes
// batch norm on bnFeatures (raw units) for each, and predicts `features`.
// Throws ConfigError when sampleCount < 2 or the BN subset is empty for a
// network with batch norm.
std::vector<EnsemblePrediction> ensemble_predict(const SwagPosterior& posterior, const emulator::Emulator& model,
                                                 const nn::Tensor& features, std::size_t sampleCount,
                                                 const nn::Tensor& bnFeatures, std::uint64_t seed);

// Sampled member weights with their refreshed batch-norm statistics, for
// repeated predictions with one ensemble.
struct SampledEnsemble {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> stats;
  std::size_t size() const { return weights.size(); }
};

// The members ensemble_predict would draw. Same errors.
SampledEnsemble sample_ensemble(const SwagPosterior& posterior, const emulator::Emulator& model,
                                std::size_t sampleCount, const nn::Tensor& bnFeatures, std::uint64_t seed);

// Raw-unit predictions of every member, reduced in member order.
std::vector<EnsemblePrediction> predict_ensemble(const SampledEnsemble& members, const emulator::Emulator& model,
                                                 const nn::Tensor& features);

struct OutputCalibration {
  double coverage95 = 0;
  double meanIntervalWidth = 0;
  double meanVariance = 0;
};

struct CalibrationReport {
  std::vector<OutputCalibration> perOutput;
  std::optional<double> corrVarSqErr;  // missing when either pooled vector is constant
};

// Coverage per output; variance and squared error are divided by scale^2
// per output (pass the training target stds to pool outputs on the
// standardized scale; empty scale pools raw units).
CalibrationReport calibration_metrics(const std::vector<EnsemblePrediction>& predictions, const nn::Tensor& truth,
                                      std::span<const double> scale = {});

// Environments ordered by mean cv of one output, highest first (ties by name).
std::vector<std::string> rank_env_uncertainty(const std::vector<EnsemblePrediction>& predictions,
                                              const std::vector<std::string>& envTags, std::size_t output);

struct CvFilterConfig {
  double defaultThreshold = 0.5;
  double relaxedThreshold = 1.0;
  std::size_t relaxedEnvCount = 4;
  std::size_t output = 6;  // GrainTotalWt
};

// Rows in the first relaxedEnvCount environments of the ranking pass at
// cv <= relaxed, all others at cv <= default. Throws InputError for a tag
// missing from the ranking.
std::vector<bool> cv_filter(const std::vector<EnsemblePrediction>& predictions,
                            const std::vector<std::string>& envTags, const CvFilterConfig& cfg,
                            const std::vector<std::string>& envUncertaintyRanking);

// One row per prediction: id, environment, then <output>_mean, <output>_std
// and <output>_cv for each output.
void write_predictions_csv(std::ostream& out, const std::vector<EnsemblePrediction>& predictions,
                           const std::vector<std::uint64_t>& ids, const std::vector<std::string>& envTags,
                           const std::vector<std::string>& outputNames);

}  // namespace cropemu::swag
