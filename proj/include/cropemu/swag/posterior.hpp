#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cropemu/emulator/model.hpp"
#include "cropemu/nn/serialize.hpp"

namespace cropemu::swag {

struct SwagConfig {
  double learningRate = 1e-2;
  double momentum = 0.9;
  double weightDecay = 1e-4;
  std::size_t totalFinetuneEpochs = 30;
  std::size_t collectFromEpoch = 21;  // 1-based; snapshots at the end of epochs collectFrom..total
  std::size_t sampleCount = 30;
  std::size_t maxRank = 10;
  std::size_t batchSize = 256;
  std::size_t batchNormUpdateBatches = 8;  // training batches used to refresh batch norm per sample
  std::uint64_t seed = 1;

  std::size_t snapshot_count() const { return totalFinetuneEpochs - collectFromEpoch + 1; }
};

// Throws ConfigError on an inverted collection window, fewer than two
// snapshots or samples, or a rank above the snapshot count.
void validate(const SwagConfig& cfg);

// Running Gaussian moments over flattened weight snapshots.
struct SwagPosterior {
  std::vector<double> weightMean;
  std::vector<double> secondMoment;
  std::vector<std::vector<double>> deviationColumns;  // oldest first
  std::size_t snapshotCount = 0;
  std::size_t maxRank = 10;

  explicit SwagPosterior(std::size_t parameters = 0, std::size_t rank = 10);
  std::size_t parameter_count() const { return weightMean.size(); }
  std::size_t rank() const { return deviationColumns.size(); }

  // Equal-weight running update; the deviation column is taken against the
  // updated mean and the oldest column is evicted beyond maxRank.
  void add_snapshot(std::span<const double> weights);
  // max(secondMoment - mean^2, 0) elementwise.
  std::vector<double> diagonal_variance() const;
};

// SGD-momentum fine-tuning from the trained emulator weights on the given
// training rows (standardized with the emulator's scaler), collecting one
// snapshot per epoch in the window. An epoch is ceil(rows / batch) steps on
// minibatches drawn independently with replacement, so snapshot spread
// reflects the stationary SGD noise (reshuffled epochs cancel most of it at
// epoch boundaries). Throws ConfigError when the window
// yields fewer than two snapshots.
SwagPosterior finetune_collect(const emulator::Emulator& model, const nn::Tensor& features,
                               const nn::Tensor& targets, std::span<const std::size_t> trainRows,
                               const SwagConfig& cfg);

// mean + sqrt(diag / 2) * z1 + D z2 / sqrt(2 (K - 1)). With fewer than two
// deviation columns the low-rank term is dropped and a warning is logged.
std::vector<double> swag_sample(const SwagPosterior& posterior, std::uint64_t seed);
// The same draw with explicit noise: z1 has one entry per weight, z2 one per
// deviation column.
std::vector<double> swag_sample(const SwagPosterior& posterior, std::span<const double> z1,
                                std::span<const double> z2);

void write_posterior(nn::BinaryWriter& w, const SwagPosterior& p, const SwagConfig& cfg);
SwagPosterior read_posterior(nn::BinaryReader& r, SwagConfig* cfg = nullptr);
void save_posterior(const SwagPosterior& p, const SwagConfig& cfg, const std::filesystem::path& path);
SwagPosterior load_posterior(const std::filesystem::path& path, SwagConfig* cfg = nullptr);

}  // namespace cropemu::swag
