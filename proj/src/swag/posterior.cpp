#include "cropemu/swag/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cropemu/error.hpp"
#include "cropemu/log.hpp"
#include "cropemu/nn/loss.hpp"
#include "cropemu/nn/optimizer.hpp"
#include "cropemu/random.hpp"

namespace cropemu::swag {
namespace {

constexpr char kMagic[9] = "CESWAGPO";
constexpr std::uint64_t kVersion = 1;

}  // namespace

void validate(const SwagConfig& c) {
  if (c.collectFromEpoch < 1 || c.collectFromEpoch > c.totalFinetuneEpochs) {
    throw ConfigError("swag collectFromEpoch must lie in [1, totalFinetuneEpochs]");
  }
  if (c.snapshot_count() < 2) throw ConfigError("swag needs at least 2 snapshots, the window gives " +
                                                std::to_string(c.snapshot_count()));
  if (c.sampleCount < 2) throw ConfigError("swag sampleCount must be at least 2");
  if (c.maxRank > c.snapshot_count()) {
    throw ConfigError("swag maxRank " + std::to_string(c.maxRank) + " exceeds the " +
                      std::to_string(c.snapshot_count()) + " collected snapshots");
  }
  if (c.batchSize == 0) throw ConfigError("swag batch size must be positive");
  nn::validate(nn::OptimizerConfig{nn::OptimizerKind::SgdMomentum, c.learningRate, c.momentum, c.weightDecay});
}

SwagPosterior::SwagPosterior(std::size_t parameters, std::size_t rank)
    : weightMean(parameters, 0.0), secondMoment(parameters, 0.0), maxRank(rank) {}

void SwagPosterior::add_snapshot(std::span<const double> w) {
  if (w.size() != weightMean.size()) {
    throw InputError("snapshot has " + std::to_string(w.size()) + " weights, posterior expects " +
                     std::to_string(weightMean.size()));
  }
  // Incremental form: identical snapshots leave the moments exactly unchanged.
  const double n1 = static_cast<double>(snapshotCount + 1);
  for (std::size_t i = 0; i < w.size(); ++i) {
    weightMean[i] += (w[i] - weightMean[i]) / n1;
    secondMoment[i] += (w[i] * w[i] - secondMoment[i]) / n1;
  }
  ++snapshotCount;
  if (maxRank == 0) return;
  std::vector<double> dev(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) dev[i] = w[i] - weightMean[i];
  deviationColumns.push_back(std::move(dev));
  if (deviationColumns.size() > maxRank) deviationColumns.erase(deviationColumns.begin());
}

std::vector<double> SwagPosterior::diagonal_variance() const {
  std::vector<double> v(weightMean.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(secondMoment[i] - weightMean[i] * weightMean[i], 0.0);
  return v;
}

SwagPosterior finetune_collect(const emulator::Emulator& model, const nn::Tensor& features,
                               const nn::Tensor& targets, std::span<const std::size_t> trainRows,
                               const SwagConfig& cfg) {
  validate(cfg);
  if (trainRows.empty()) throw InputError("swag fine-tuning needs training rows");
  const nn::Network& net = model.model.net;
  const nn::Tensor x = model.scaler.features.transform(features.gather_rows(trainRows));
  const nn::Tensor y = model.scaler.targets.transform(targets.gather_rows(trainRows));
  std::vector<double> params = model.model.params;
  std::vector<double> stats = model.model.stats;
  SwagPosterior post(params.size(), cfg.maxRank);

  const nn::OptimizerConfig opt{nn::OptimizerKind::SgdMomentum, cfg.learningRate, cfg.momentum, cfg.weightDecay};
  nn::OptimizerState state;
  Rng rng(derive_seed(cfg.seed, 0x5a9));
  const std::size_t N = x.batch();
  const std::size_t batch = std::min(cfg.batchSize, N);
  const std::size_t steps = (N + batch - 1) / batch;
  std::vector<std::size_t> rows(batch);
  for (std::size_t epoch = 1; epoch <= cfg.totalFinetuneEpochs; ++epoch) {
    for (std::size_t step = 0; step < steps; ++step) {
      for (auto& r : rows) r = uniform_index(rng, N);
      const auto g = nn::network_gradients(net, params, x.gather_rows(rows), y.gather_rows(rows), nn::LossKind::Mse,
                                           {}, stats);
      nn::optimizer_step(opt, params, g.gradient, state);
    }
    if (epoch >= cfg.collectFromEpoch) post.add_snapshot(params);
  }
  return post;
}

std::vector<double> swag_sample(const SwagPosterior& p, std::span<const double> z1, std::span<const double> z2) {
  if (p.snapshotCount < 2) throw ConfigError("cannot sample a swag posterior with fewer than 2 snapshots");
  if (z1.size() != p.parameter_count() || z2.size() != p.rank()) throw InputError("swag noise has the wrong length");
  const auto diag = p.diagonal_variance();
  std::vector<double> w = p.weightMean;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += std::sqrt(0.5 * diag[i]) * z1[i];
  const std::size_t K = p.rank();
  if (K >= 2) {
    const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(K - 1));
    for (std::size_t j = 0; j < K; ++j) {
      const double z = z2[j] * scale;
      const auto& col = p.deviationColumns[j];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += col[i] * z;
    }
  } else if (K == 1 && std::any_of(p.deviationColumns[0].begin(), p.deviationColumns[0].end(),
                                   [](double d) { return d != 0.0; })) {
    log_warning("swag posterior has a single deviation column; sampling the diagonal term only");
  }
  return w;
}

std::vector<double> swag_sample(const SwagPosterior& p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> z1(p.parameter_count()), z2(p.rank());
  for (auto& z : z1) z = standard_normal(rng);
  for (auto& z : z2) z = standard_normal(rng);
  return swag_sample(p, z1, z2);
}

void write_posterior(nn::BinaryWriter& w, const SwagPosterior& p, const SwagConfig& c) {
  w.f64(c.learningRate);
  w.f64(c.momentum);
  w.f64(c.weightDecay);
  w.u64(c.totalFinetuneEpochs);
  w.u64(c.collectFromEpoch);
  w.u64(c.sampleCount);
  w.u64(c.maxRank);
  w.u64(c.batchSize);
  w.u64(c.batchNormUpdateBatches);
  w.u64(c.seed);
  w.u64(p.snapshotCount);
  w.u64(p.maxRank);
  w.doubles(p.weightMean);
  w.doubles(p.secondMoment);
  w.u64(p.deviationColumns.size());
  for (const auto& col : p.deviationColumns) w.doubles(col);
}

SwagPosterior read_posterior(nn::BinaryReader& r, SwagConfig* cfg) {
  SwagConfig c;
  c.learningRate = r.f64();
  c.momentum = r.f64();
  c.weightDecay = r.f64();
  c.totalFinetuneEpochs = r.u64();
  c.collectFromEpoch = r.u64();
  c.sampleCount = r.u64();
  c.maxRank = r.u64();
  c.batchSize = r.u64();
  c.batchNormUpdateBatches = r.u64();
  c.seed = r.u64();
  SwagPosterior p;
  p.snapshotCount = r.u64();
  p.maxRank = r.u64();
  p.weightMean = r.doubles();
  p.secondMoment = r.doubles();
  const std::uint64_t cols = r.u64();
  if (cols > p.maxRank || p.secondMoment.size() != p.weightMean.size()) {
    throw ParseError(r.source() + ": inconsistent swag posterior");
  }
  for (std::uint64_t j = 0; j < cols; ++j) {
    p.deviationColumns.push_back(r.doubles());
    if (p.deviationColumns.back().size() != p.weightMean.size()) {
      throw ParseError(r.source() + ": deviation column length differs from the weight count");
    }
  }
  if (cfg) *cfg = c;
  return p;
}

void save_posterior(const SwagPosterior& p, const SwagConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  nn::BinaryWriter w(out);
  nn::write_header(w, kMagic, kVersion);
  write_posterior(w, p, cfg);
  if (!out) throw InputError("failed writing " + path.string());
}

SwagPosterior load_posterior(const std::filesystem::path& path, SwagConfig* cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open swag posterior " + path.string());
  nn::BinaryReader r(in, path.string());
  r.expect_header(kMagic, kVersion);
  return read_posterior(r, cfg);
}

}  // namespace cropemu::swag
