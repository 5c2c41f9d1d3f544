#include "cropemu/swag/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "cropemu/csv.hpp"
#include "cropemu/error.hpp"
#include "cropemu/parallel.hpp"
#include "cropemu/random.hpp"

namespace cropemu::swag {
namespace {

// Welford accumulation over members, one (rows x outputs) tensor at a time.
class MemberAccumulator {
 public:
  void add(const nn::Tensor& m) {
    if (count_ == 0) {
      shape_ = m.shape;
      mean_.assign(m.size(), 0.0);
      m2_.assign(m.size(), 0.0);
    } else if (m.shape != shape_) {
      throw InputError("ensemble members disagree in shape");
    }
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double d = m.values[k] - mean_[k];
      mean_[k] += d / n;
      m2_[k] += d * (m.values[k] - mean_[k]);
    }
  }

  std::vector<EnsemblePrediction> result() const {
    if (count_ < 2) throw ConfigError("an ensemble needs at least 2 members");
    const std::size_t rows = shape_[0], outs = shape_[1];
    std::vector<EnsemblePrediction> preds(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      EnsemblePrediction& p = preds[r];
      p.mean.resize(outs);
      p.variance.resize(outs);
      p.lower.resize(outs);
      p.upper.resize(outs);
      p.cv.resize(outs);
      for (std::size_t c = 0; c < outs; ++c) {
        const std::size_t k = r * outs + c;
        const double var = std::max(m2_[k] / static_cast<double>(count_), 0.0);
        const double sd = std::sqrt(var);
        p.mean[c] = mean_[k];
        p.variance[c] = var;
        p.lower[c] = mean_[k] - kInterval95 * sd;
        p.upper[c] = mean_[k] + kInterval95 * sd;
        p.cv[c] = sd / std::max(std::abs(mean_[k]), kCvFloor);
      }
    }
    return preds;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> mean_, m2_;
  std::size_t count_ = 0;
};

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return std::nullopt;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::vector<EnsemblePrediction> summarize_members(const std::vector<nn::Tensor>& members) {
  MemberAccumulator acc;
  for (const auto& m : members) acc.add(m);
  return acc.result();
}

SampledEnsemble sample_ensemble(const SwagPosterior& posterior, const emulator::Emulator& model,
                                std::size_t sampleCount, const nn::Tensor& bnFeatures, std::uint64_t seed) {
  if (sampleCount < 2) throw ConfigError("ensemble sampleCount must be at least 2");
  const nn::Network& net = model.model.net;
  if (posterior.parameter_count() != net.parameter_count()) {
    throw ConfigError("swag posterior has " + std::to_string(posterior.parameter_count()) +
                      " weights but the emulator has " + std::to_string(net.parameter_count()));
  }
  if (net.has_batchnorm() && bnFeatures.batch() == 0) {
    throw ConfigError("batch-norm refresh subset is empty");
  }
  const nn::Tensor bn = net.has_batchnorm() ? model.scaler.features.transform(bnFeatures) : nn::Tensor();
  SampledEnsemble members;
  members.weights.resize(sampleCount);
  members.stats.resize(sampleCount);
  parallel_for(sampleCount, [&](std::size_t m) {
    members.weights[m] = swag_sample(posterior, derive_seed(seed, m));
    members.stats[m] = net.initial_running_stats();
    if (net.has_batchnorm()) net.forward(members.weights[m], bn, nn::Mode::RefreshStats, members.stats[m]);
  });
  return members;
}

std::vector<EnsemblePrediction> predict_ensemble(const SampledEnsemble& members, const emulator::Emulator& model,
                                                 const nn::Tensor& features) {
  const nn::Network& net = model.model.net;
  const nn::Tensor x = model.scaler.features.transform(features);
  MemberAccumulator acc;
  const std::size_t group = std::max<std::size_t>(1, max_jobs());
  for (std::size_t first = 0; first < members.size(); first += group) {
    const std::size_t count = std::min(group, members.size() - first);
    std::vector<nn::Tensor> out(count);
    parallel_for(count, [&](std::size_t j) {
      std::vector<double> stats = members.stats[first + j];
      out[j] = model.scaler.targets.inverse(net.forward(members.weights[first + j], x, nn::Mode::Eval, stats));
    });
    for (const auto& m : out) acc.add(m);
  }
  return acc.result();
}

std::vector<EnsemblePrediction> ensemble_predict(const SwagPosterior& posterior, const emulator::Emulator& model,
                                                 const nn::Tensor& features, std::size_t sampleCount,
                                                 const nn::Tensor& bnFeatures, std::uint64_t seed) {
  return predict_ensemble(sample_ensemble(posterior, model, sampleCount, bnFeatures, seed), model, features);
}

CalibrationReport calibration_metrics(const std::vector<EnsemblePrediction>& predictions, const nn::Tensor& truth,
                                      std::span<const double> scale) {
  if (truth.rank() != 2 || truth.batch() != predictions.size()) {
    throw InputError("calibration needs one truth row per prediction");
  }
  const std::size_t outs = truth.shape[1];
  if (!scale.empty() && scale.size() != outs) throw InputError("calibration scale must have one entry per output");
  CalibrationReport rep;
  rep.perOutput.resize(outs);
  std::vector<double> var, sq;
  var.reserve(predictions.size() * outs);
  sq.reserve(predictions.size() * outs);
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const EnsemblePrediction& p = predictions[r];
    if (p.mean.size() != outs) throw InputError("prediction width differs from the truth width");
    for (std::size_t c = 0; c < outs; ++c) {
      const double t = truth.values[r * outs + c];
      OutputCalibration& o = rep.perOutput[c];
      if (t >= p.lower[c] && t <= p.upper[c]) o.coverage95 += 1;
      o.meanIntervalWidth += p.upper[c] - p.lower[c];
      o.meanVariance += p.variance[c];
      const double s2 = scale.empty() ? 1.0 : scale[c] * scale[c];
      var.push_back(p.variance[c] / s2);
      sq.push_back((p.mean[c] - t) * (p.mean[c] - t) / s2);
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(predictions.size(), 1));
  for (auto& o : rep.perOutput) {
    o.coverage95 /= n;
    o.meanIntervalWidth /= n;
    o.meanVariance /= n;
  }
  rep.corrVarSqErr = pearson(var, sq);
  return rep;
}

std::vector<std::string> rank_env_uncertainty(const std::vector<EnsemblePrediction>& predictions,
                                              const std::vector<std::string>& envTags, std::size_t output) {
  if (envTags.size() != predictions.size()) throw InputError("one environment tag per prediction required");
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    if (output >= predictions[r].cv.size()) throw InputError("output index out of range");
    auto& s = sums[envTags[r]];
    s.first += predictions[r].cv[output];
    s.second += 1;
  }
  std::vector<std::pair<std::string, double>> envs;
  for (const auto& [name, s] : sums) envs.emplace_back(name, s.first / static_cast<double>(s.second));
  std::stable_sort(envs.begin(), envs.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (const auto& e : envs) out.push_back(e.first);
  return out;
}

std::vector<bool> cv_filter(const std::vector<EnsemblePrediction>& predictions,
                            const std::vector<std::string>& envTags, const CvFilterConfig& cfg,
                            const std::vector<std::string>& envUncertaintyRanking) {
  if (envTags.size() != predictions.size()) throw InputError("one environment tag per prediction required");
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < envUncertaintyRanking.size(); ++i) position.emplace(envUncertaintyRanking[i], i);
  std::vector<bool> keep(predictions.size());
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const auto it = position.find(envTags[r]);
    if (it == position.end()) throw InputError("environment '" + envTags[r] + "' is missing from the uncertainty ranking");
    if (cfg.output >= predictions[r].cv.size()) throw InputError("cv filter output index out of range");
    const double limit = it->second < cfg.relaxedEnvCount ? cfg.relaxedThreshold : cfg.defaultThreshold;
    keep[r] = predictions[r].cv[cfg.output] <= limit;
  }
  return keep;
}

void write_predictions_csv(std::ostream& out, const std::vector<EnsemblePrediction>& predictions,
                           const std::vector<std::uint64_t>& ids, const std::vector<std::string>& envTags,
                           const std::vector<std::string>& outputNames) {
  if (ids.size() != predictions.size() || envTags.size() != predictions.size()) {
    throw InputError("prediction export needs one id and environment per row");
  }
  out << "# interval95: gaussian, mean +/- 1.96 sd across ensemble members\n";
  csv::Writer w(out);
  w.field("id").field("environment");
  for (const auto& n : outputNames) w.field(n + "_mean");
  for (const auto& n : outputNames) w.field(n + "_std");
  for (const auto& n : outputNames) w.field(n + "_cv");
  w.end_row();
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const auto& p = predictions[r];
    w.field(static_cast<std::size_t>(ids[r])).field(envTags[r]);
    for (double v : p.mean) w.field(v);
    for (double v : p.variance) w.field(std::sqrt(v));
    for (double v : p.cv) w.field(v);
    w.end_row();
  }
}

}  // namespace cropemu::swag
