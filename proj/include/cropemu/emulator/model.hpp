#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropemu/emulator/dataset.hpp"
#include "cropemu/emulator/standardizer.hpp"
#include "cropemu/nn/serialize.hpp"

namespace cropemu::emulator {

struct EmulatorHyper {
  std::vector<std::size_t> hidden{64, 64, 64, 32};
  double learningRate = 3e-4;
  double weightDecay = 1e-4;
  std::size_t batchSize = 256;
  std::size_t maxEpochs = 50;
  std::uint64_t seed = 1;

  // The full-size widths 256-256-256-128.
  static std::vector<std::size_t> paper_hidden() { return {256, 256, 256, 128}; }
};

// dense -> batch norm -> relu per hidden width, then a linear output layer.
nn::NetworkSpec mlp_spec(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs);

struct Emulator {
  EmulatorHyper hyper;
  nn::TrainedNetwork model;  // maps standardized features to standardized targets
  Standardizer scaler;
  std::vector<std::string> featureNames;
  std::vector<std::string> targetNames;
  std::vector<double> epochLoss;

  // Raw features in, raw targets out (eval mode).
  nn::Tensor predict(const nn::Tensor& features) const;
  nn::Tensor predict_standardized(const nn::Tensor& standardizedFeatures) const;
};

// Trains on the given rows of (features, targets). The scaler is fitted on
// those rows only; zero-variance columns raise ConfigError.
Emulator train_emulator(const nn::Tensor& features, const nn::Tensor& targets,
                        std::span<const std::size_t> trainRows, const std::vector<std::string>& featureNames,
                        const std::vector<std::string>& targetNames, const EmulatorHyper& hyper);
Emulator train_emulator(const EmulatorDataset& dataset, const EmulatorHyper& hyper);

struct OutputMetrics {
  std::string name;
  double mse = 0;
  double mae = 0;
  double r2 = 0;
  double rawMae = 0;  // mean absolute error in the output's own units
};

struct RegressionReport {
  std::vector<OutputMetrics> perOutput;
  double mse = 0;
  double mae = 0;
  double rmse = 0;
  double r2 = 0;
  double targetVariance = 0;  // pooled per-column variance of the targets
};

// Metrics of predictions against targets on whatever scale they are given.
// Global r2 = 1 - mse / targetVariance. Throws InputError on empty or
// mismatched matrices.
RegressionReport regression_metrics(const nn::Tensor& predicted, const nn::Tensor& target,
                                    const std::vector<std::string>& names = {});

// The r2 implied by an mse on unit-variance targets.
inline double r2_from_mse(double mse, double targetVariance = 1.0) { return 1.0 - mse / targetVariance; }

// Standardized-scale metrics on one split, with raw-unit MAE filled in.
RegressionReport evaluate(const Emulator& model, const EmulatorDataset& dataset, Split which);
RegressionReport evaluate_rows(const Emulator& model, const nn::Tensor& features, const nn::Tensor& targets,
                               std::span<const std::size_t> rows);

struct LearningPoint {
  std::size_t size = 0;
  double trainR2 = 0;
  double testR2 = 0;
  double testRmse = 0;
};

// Trains one model per size on nested prefixes of a seeded shuffle of the
// training rows; the test split is shared. Sizes must be ascending and no
// larger than the training pool (InputError otherwise).
std::vector<LearningPoint> learning_curve(const EmulatorDataset& dataset, const std::vector<std::size_t>& sizes,
                                          const EmulatorHyper& hyper, std::uint64_t seed);

void write_emulator(nn::BinaryWriter& w, const Emulator& model);
Emulator read_emulator(nn::BinaryReader& r);
void save_emulator(const Emulator& model, const std::filesystem::path& path);
Emulator load_emulator(const std::filesystem::path& path);

}  // namespace cropemu::emulator
