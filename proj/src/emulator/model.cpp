#include "cropemu/emulator/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cropemu/error.hpp"
#include "cropemu/nn/loss.hpp"
#include "cropemu/nn/optimizer.hpp"
#include "cropemu/parallel.hpp"
#include "cropemu/random.hpp"

namespace cropemu::emulator {
namespace {

constexpr char kMagic[9] = "CEEMULAT";
constexpr std::uint64_t kVersion = 1;

nn::Tensor select(const nn::Tensor& m, std::span<const std::size_t> rows) { return m.gather_rows(rows); }

void write_scaler(nn::BinaryWriter& w, const ColumnScaler& s) {
  w.doubles(s.means);
  w.doubles(s.stds);
}

ColumnScaler read_scaler(nn::BinaryReader& r) {
  ColumnScaler s;
  s.means = r.doubles();
  s.stds = r.doubles();
  if (s.means.size() != s.stds.size()) throw ParseError(r.source() + ": scaler vectors differ in length");
  return s;
}

void write_names(nn::BinaryWriter& w, const std::vector<std::string>& names) {
  w.u64(names.size());
  for (const auto& n : names) w.text(n);
}

std::vector<std::string> read_names(nn::BinaryReader& r) {
  const std::uint64_t n = r.u64();
  if (n > (1u << 20)) throw ParseError(r.source() + ": implausible name count");
  std::vector<std::string> names(n);
  for (auto& s : names) s = r.text();
  return names;
}

}  // namespace

nn::NetworkSpec mlp_spec(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs) {
  using nn::LayerSpec;
  nn::NetworkSpec spec;
  std::size_t width = inputs;
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
    spec.layers.push_back(LayerSpec::dense(width, h));
    spec.layers.push_back(LayerSpec::batchnorm1d(h));
    spec.layers.push_back(LayerSpec::relu());
    width = h;
  }
  spec.layers.push_back(LayerSpec::dense(width, outputs));
  return spec;
}

nn::Tensor Emulator::predict_standardized(const nn::Tensor& standardizedFeatures) const {
  std::vector<double> stats = model.stats;  // eval mode reads only
  return model.net.forward(model.params, standardizedFeatures, nn::Mode::Eval, stats);
}

nn::Tensor Emulator::predict(const nn::Tensor& features) const {
  return scaler.targets.inverse(predict_standardized(scaler.features.transform(features)));
}

Emulator train_emulator(const nn::Tensor& features, const nn::Tensor& targets,
                        std::span<const std::size_t> trainRows, const std::vector<std::string>& featureNames,
                        const std::vector<std::string>& targetNames, const EmulatorHyper& h) {
  if (features.rank() != 2 || targets.rank() != 2 || features.batch() != targets.batch()) {
    throw InputError("features and targets must be matrices with equal row counts");
  }
  if (trainRows.empty()) throw InputError("cannot train an emulator on zero rows");
  if (h.batchSize == 0 || h.maxEpochs == 0) throw ConfigError("batch size and epoch count must be positive");

  Emulator em;
  em.hyper = h;
  em.featureNames = featureNames;
  em.targetNames = targetNames;
  em.scaler.features = ColumnScaler::fit(features, trainRows, featureNames);
  em.scaler.targets = ColumnScaler::fit(targets, trainRows, targetNames);
  const nn::Tensor x = em.scaler.features.transform(select(features, trainRows));
  const nn::Tensor y = em.scaler.targets.transform(select(targets, trainRows));

  nn::TrainedNetwork& m = em.model;
  m.net = nn::Network(mlp_spec(features.shape[1], h.hidden, targets.shape[1]), {features.shape[1]});
  m.params = m.net.initial_parameters(derive_seed(h.seed, 1));
  m.stats = m.net.initial_running_stats();

  nn::OptimizerConfig opt{nn::OptimizerKind::AdaptiveMoment, h.learningRate, 0.0, h.weightDecay};
  nn::validate(opt);
  nn::OptimizerState state;
  Rng rng(derive_seed(h.seed, 2));
  const std::size_t N = x.batch();
  const std::size_t batch = std::min(h.batchSize, N);
  for (std::size_t epoch = 0; epoch < h.maxEpochs; ++epoch) {
    const auto order = permutation(N, rng);
    double total = 0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < N; start += batch) {
      const std::size_t stop = std::min(N, start + batch);
      // A single-row batch has no batch-norm statistics to speak of.
      if (stop - start < 2 && m.net.has_batchnorm() && N > 1) continue;
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      const auto g = nn::network_gradients(m.net, m.params, x.gather_rows(rows), y.gather_rows(rows),
                                           nn::LossKind::Mse, {}, m.stats);
      nn::optimizer_step(opt, m.params, g.gradient, state);
      total += g.loss * static_cast<double>(rows.size());
      seen += rows.size();
    }
    const double loss = total / static_cast<double>(std::max<std::size_t>(seen, 1));
    if (!std::isfinite(loss)) throw NumericError("emulator loss diverged at epoch " + std::to_string(epoch + 1));
    em.epochLoss.push_back(loss);
  }
  if (m.net.has_batchnorm()) m.net.forward(m.params, x, nn::Mode::RefreshStats, m.stats);
  return em;
}

Emulator train_emulator(const EmulatorDataset& dataset, const EmulatorHyper& hyper) {
  const auto rows = dataset.rows(Split::Train);
  return train_emulator(dataset.features, dataset.targets, rows, dataset.featureNames, dataset.targetNames, hyper);
}

RegressionReport regression_metrics(const nn::Tensor& predicted, const nn::Tensor& target,
                                    const std::vector<std::string>& names) {
  if (predicted.shape != target.shape || target.rank() != 2) {
    throw InputError("prediction shape " + nn::shape_to_string(predicted.shape) + " does not match target shape " +
                     nn::shape_to_string(target.shape));
  }
  const std::size_t n = target.shape[0], k = target.shape[1];
  if (n == 0 || k == 0) throw InputError("cannot compute metrics on an empty split");
  RegressionReport rep;
  rep.perOutput.resize(k);
  double sse = 0, sae = 0, varSum = 0;
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += target.values[r * k + c];
    mean /= static_cast<double>(n);
    double se = 0, ae = 0, ss = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double t = target.values[r * k + c];
      const double d = predicted.values[r * k + c] - t;
      se += d * d;
      ae += std::abs(d);
      ss += (t - mean) * (t - mean);
    }
    OutputMetrics& o = rep.perOutput[c];
    o.name = c < names.size() ? names[c] : "output" + std::to_string(c);
    o.mse = se / static_cast<double>(n);
    o.mae = ae / static_cast<double>(n);
    o.r2 = ss > 0 ? 1.0 - se / ss : (se == 0 ? 1.0 : 0.0);
    sse += se;
    sae += ae;
    varSum += ss / static_cast<double>(n);
  }
  const double count = static_cast<double>(n * k);
  rep.mse = sse / count;
  rep.mae = sae / count;
  rep.rmse = std::sqrt(rep.mse);
  rep.targetVariance = varSum / static_cast<double>(k);
  rep.r2 = rep.targetVariance > 0 ? r2_from_mse(rep.mse, rep.targetVariance) : (rep.mse == 0 ? 1.0 : 0.0);
  return rep;
}

RegressionReport evaluate_rows(const Emulator& model, const nn::Tensor& features, const nn::Tensor& targets,
                               std::span<const std::size_t> rows) {
  if (rows.empty()) throw InputError("cannot evaluate an emulator on an empty split");
  const nn::Tensor rawTarget = select(targets, rows);
  const nn::Tensor stdPred = model.predict_standardized(model.scaler.features.transform(select(features, rows)));
  RegressionReport rep = regression_metrics(stdPred, model.scaler.targets.transform(rawTarget), model.targetNames);
  const nn::Tensor rawPred = model.scaler.targets.inverse(stdPred);
  const std::size_t k = rawTarget.shape[1];
  for (std::size_t c = 0; c < k; ++c) {
    double ae = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) ae += std::abs(rawPred.values[r * k + c] - rawTarget.values[r * k + c]);
    rep.perOutput[c].rawMae = ae / static_cast<double>(rows.size());
  }
  return rep;
}

RegressionReport evaluate(const Emulator& model, const EmulatorDataset& dataset, Split which) {
  const auto rows = dataset.rows(which);
  return evaluate_rows(model, dataset.features, dataset.targets, rows);
}

std::vector<LearningPoint> learning_curve(const EmulatorDataset& dataset, const std::vector<std::size_t>& sizes,
                                          const EmulatorHyper& hyper, std::uint64_t seed) {
  const auto pool = dataset.rows(Split::Train);
  const auto test = dataset.rows(Split::Test);
  if (test.empty()) throw InputError("learning curve needs a nonempty test split");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || sizes[i] > pool.size()) {
      throw InputError("learning-curve size " + std::to_string(sizes[i]) + " exceeds the training pool of " +
                       std::to_string(pool.size()));
    }
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw InputError("learning-curve sizes must be strictly ascending");
  }
  std::vector<std::size_t> shuffled = pool;
  Rng rng(derive_seed(seed, 0x1c));
  shuffle(shuffled, rng);
  std::vector<LearningPoint> points(sizes.size());
  parallel_for(sizes.size(), [&](std::size_t i) {
    std::span<const std::size_t> subset(shuffled.data(), sizes[i]);
    const Emulator em = train_emulator(dataset.features, dataset.targets, subset, dataset.featureNames,
                                       dataset.targetNames, hyper);
    const RegressionReport tr = evaluate_rows(em, dataset.features, dataset.targets, subset);
    const RegressionReport te = evaluate_rows(em, dataset.features, dataset.targets, test);
    points[i] = {sizes[i], tr.r2, te.r2, te.rmse};
  });
  return points;
}

void write_emulator(nn::BinaryWriter& w, const Emulator& m) {
  w.sizes(m.hyper.hidden);
  w.f64(m.hyper.learningRate);
  w.f64(m.hyper.weightDecay);
  w.u64(m.hyper.batchSize);
  w.u64(m.hyper.maxEpochs);
  w.u64(m.hyper.seed);
  nn::write_trained(w, m.model);
  write_scaler(w, m.scaler.features);
  write_scaler(w, m.scaler.targets);
  write_names(w, m.featureNames);
  write_names(w, m.targetNames);
  w.doubles(m.epochLoss);
}

Emulator read_emulator(nn::BinaryReader& r) {
  Emulator m;
  m.hyper.hidden = r.sizes();
  m.hyper.learningRate = r.f64();
  m.hyper.weightDecay = r.f64();
  m.hyper.batchSize = r.u64();
  m.hyper.maxEpochs = r.u64();
  m.hyper.seed = r.u64();
  m.model = nn::read_trained(r);
  m.scaler.features = read_scaler(r);
  m.scaler.targets = read_scaler(r);
  m.featureNames = read_names(r);
  m.targetNames = read_names(r);
  m.epochLoss = r.doubles();
  if (m.scaler.features.width() != m.model.net.input_shape()[0] ||
      m.scaler.targets.width() != m.model.net.output_shape()[0]) {
    throw ParseError(r.source() + ": standardizer width does not match the network");
  }
  return m;
}

void save_emulator(const Emulator& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  nn::BinaryWriter w(out);
  nn::write_header(w, kMagic, kVersion);
  write_emulator(w, model);
  if (!out) throw InputError("failed writing " + path.string());
}

Emulator load_emulator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open emulator " + path.string());
  nn::BinaryReader r(in, path.string());
  r.expect_header(kMagic, kVersion);
  return read_emulator(r);
}

}  // namespace cropemu::emulator
