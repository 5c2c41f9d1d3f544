#include "cropemu/discovery/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::discovery {
namespace {

void check(const nn::Tensor& features, const std::vector<double>& target, std::size_t repeats) {
  if (features.rank() != 2 || features.batch() == 0) throw InputError("importance needs a nonempty feature slice");
  if (target.size() != features.batch()) throw InputError("importance needs one target per row");
  if (repeats == 0) throw InputError("importance needs at least one repeat");
}

}  // namespace

double r2_score(const std::vector<double>& predicted, const std::vector<double>& target) {
  if (predicted.size() != target.size() || target.empty()) throw InputError("r2 needs equal nonempty vectors");
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
  double sse = 0, sst = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    sse += (predicted[i] - target[i]) * (predicted[i] - target[i]);
    sst += (target[i] - mean) * (target[i] - mean);
  }
  if (sst <= 0) return sse == 0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

std::vector<Importance> permutation_importance(const Predictor& predictor, const nn::Tensor& features,
                                               const std::vector<double>& target,
                                               const std::vector<std::string>& names, std::size_t repeats,
                                               std::uint64_t seed) {
  check(features, target, repeats);
  const std::size_t n = features.shape[0], d = features.shape[1];
  const double baseline = r2_score(predictor(features), target);
  std::vector<Importance> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    out[j].name = j < names.size() ? names[j] : "x" + std::to_string(j);
    Rng rng(derive_seed(seed, j));
    std::vector<double> drops;
    for (std::size_t r = 0; r < repeats; ++r) {
      nn::Tensor shuffled = features;
      const auto perm = permutation(n, rng);
      for (std::size_t i = 0; i < n; ++i) shuffled.values[i * d + j] = features.values[perm[i] * d + j];
      drops.push_back(baseline - r2_score(predictor(shuffled), target));
    }
    const double m = std::accumulate(drops.begin(), drops.end(), 0.0) / static_cast<double>(repeats);
    double var = 0;
    for (double x : drops) var += (x - m) * (x - m);
    out[j].drop = m;
    out[j].dropStd = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
  }
  double positive = 0;
  for (const auto& imp : out) positive += std::max(imp.drop, 0.0);
  for (auto& imp : out) imp.percent = positive > 0 ? 100.0 * std::max(imp.drop, 0.0) / positive : 0.0;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return out[a].drop > out[b].drop; });
  for (std::size_t r = 0; r < d; ++r) out[order[r]].rank = static_cast<int>(r + 1);
  return out;
}

double joint_permutation_drop(const Predictor& predictor, const nn::Tensor& features,
                              const std::vector<double>& target, std::size_t repeats, std::uint64_t seed) {
  check(features, target, repeats);
  const std::size_t n = features.shape[0];
  const double baseline = r2_score(predictor(features), target);
  Rng rng(seed);
  double total = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto perm = permutation(n, rng);
    total += baseline - r2_score(predictor(features.gather_rows(perm)), target);
  }
  return total / static_cast<double>(repeats);
}

}  // namespace cropemu::discovery
