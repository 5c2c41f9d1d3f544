#include "cropemu/discovery/cluster.hpp"

#include <cmath>
#include <limits>

#include "cropemu/error.hpp"
#include "cropemu/parallel.hpp"
#include "cropemu/random.hpp"

namespace cropemu::discovery {
namespace {

struct Run {
  std::vector<std::size_t> assignment;
  std::vector<double> centroids;  // k x d, z-scored
  std::vector<double> history;
  double sse = 0;
};

double dist2(const double* a, const double* b, std::size_t d) {
  double s = 0;
  for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

Run lloyd(const std::vector<double>& z, std::size_t n, std::size_t d, std::size_t k, std::size_t maxIter,
          std::uint64_t seed) {
  Rng rng(seed);
  Run run;
  run.centroids.assign(k * d, 0.0);
  // k-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(z.begin() + static_cast<long>(pick * d), z.begin() + static_cast<long>((pick + 1) * d),
              run.centroids.begin() + static_cast<long>(c * d));
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], dist2(&z[i * d], &run.centroids[c * d], d));
      total += nearest[i];
    }
    if (c + 1 == k) break;
    if (total <= 0) {
      pick = uniform_index(rng, n);
      continue;
    }
    double u = uniform01(rng) * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      u -= nearest[i];
      if (u < 0) {
        pick = i;
        break;
      }
    }
  }

  run.assignment.assign(n, k);
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < maxIter; ++iter) {
    bool changed = false;
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bestD = dist2(&z[i * d], &run.centroids[0], d);
      for (std::size_t c = 1; c < k; ++c) {
        const double dc = dist2(&z[i * d], &run.centroids[c * d], d);
        if (dc < bestD) {
          bestD = dc;
          best = c;
        }
      }
      if (run.assignment[i] != best) changed = true;
      run.assignment[i] = best;
      dist[i] = bestD;
      sse += bestD;
    }
    run.history.push_back(sse);
    run.sse = sse;
    if (!changed) break;
    std::vector<double> sum(k * d, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[run.assignment[i]];
      for (std::size_t j = 0; j < d; ++j) sum[run.assignment[i] * d + j] += z[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Re-seed an emptied cluster at the worst-served point.
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (dist[i] > dist[far]) far = i;
        dist[far] = 0;
        std::copy(z.begin() + static_cast<long>(far * d), z.begin() + static_cast<long>((far + 1) * d),
                  run.centroids.begin() + static_cast<long>(c * d));
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) run.centroids[c * d + j] = sum[c * d + j] / static_cast<double>(count[c]);
    }
  }
  return run;
}

}  // namespace

KMeansResult kmeans_cluster(const nn::Tensor& points, const KMeansOptions& o) {
  if (points.rank() != 2) throw InputError("k-means expects a points matrix");
  const std::size_t n = points.shape[0], d = points.shape[1];
  if (o.k == 0 || n < o.k) {
    throw ConfigError("k-means needs at least k=" + std::to_string(o.k) + " points, got " + std::to_string(n));
  }
  if (o.restarts == 0 || o.maxIterations == 0) throw ConfigError("k-means restarts and iterations must be positive");
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += points.values[i * d + j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(points.values[i * d + j] - mean[j], 2);
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0)) s = 1.0;
  }
  std::vector<double> z(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) z[i * d + j] = (points.values[i * d + j] - mean[j]) / sd[j];

  std::vector<Run> runs(o.restarts);
  parallel_for(o.restarts, [&](std::size_t r) { runs[r] = lloyd(z, n, d, o.k, o.maxIterations, derive_seed(o.seed, r)); });

  KMeansResult res;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].sse < runs[res.bestRestart].sse) res.bestRestart = r;
  Run& best = runs[res.bestRestart];
  res.assignment = best.assignment;
  res.sse = best.sse;
  for (const auto& run : runs) res.sseHistory.push_back(run.history);
  // Centroids in raw units: member means of the original columns.
  res.centroids = nn::Tensor({o.k, d});
  std::vector<std::size_t> count(o.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ++count[res.assignment[i]];
    for (std::size_t j = 0; j < d; ++j) res.centroids.values[res.assignment[i] * d + j] += points.values[i * d + j];
  }
  for (std::size_t c = 0; c < o.k; ++c)
    for (std::size_t j = 0; j < d; ++j) {
      if (count[c]) {
        res.centroids.values[c * d + j] /= static_cast<double>(count[c]);
      } else {
        res.centroids.values[c * d + j] = best.centroids[c * d + j] * sd[j] + mean[j];
      }
    }
  return res;
}

ClusterSummary summarize_clusters(const KMeansResult& result, const nn::Tensor& points,
                                  const std::vector<std::string>& traitNames,
                                  const std::vector<std::vector<double>>& yields,
                                  const std::vector<std::string>& envLocations) {
  const std::size_t n = points.shape[0], d = points.shape[1];
  const std::size_t k = result.centroids.shape[0];
  if (yields.size() != n || result.assignment.size() != n) throw InputError("cluster summary inputs differ in length");
  ClusterSummary s;
  s.traitNames = traitNames;
  s.clusters.resize(k);
  for (auto& c : s.clusters) c.traitMeans.assign(d, 0.0);
  std::vector<double> ySum(k, 0.0), ySq(k, 0.0);
  std::vector<std::size_t> yCount(k, 0);
  std::map<std::string, std::vector<std::pair<double, std::size_t>>> byLocation;  // per cluster sum,count
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = result.assignment[i];
    ++s.clusters[c].size;
    for (std::size_t j = 0; j < d; ++j) s.clusters[c].traitMeans[j] += points.values[i * d + j];
    if (yields[i].size() != envLocations.size()) throw InputError("one yield per environment required");
    for (std::size_t e = 0; e < yields[i].size(); ++e) {
      const double y = yields[i][e];
      ySum[c] += y;
      ySq[c] += y * y;
      ++yCount[c];
      auto& loc = byLocation[envLocations[e]];
      loc.resize(k);
      loc[c].first += y;
      loc[c].second += 1;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto& p = s.clusters[c];
    if (p.size)
      for (auto& m : p.traitMeans) m /= static_cast<double>(p.size);
    if (yCount[c]) {
      const double m = ySum[c] / static_cast<double>(yCount[c]);
      p.yieldMean = m;
      p.yieldStd = std::sqrt(std::max(ySq[c] / static_cast<double>(yCount[c]) - m * m, 0.0));
    }
  }
  for (const auto& [loc, sums] : byLocation) {
    std::size_t best = k;
    double bestMean = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (sums[c].second == 0) continue;
      const double m = sums[c].first / static_cast<double>(sums[c].second);
      if (m > bestMean) {
        bestMean = m;
        best = c;
      }
    }
    s.bestClusterPerLocation[loc] = best;
  }
  return s;
}

}  // namespace cropemu::discovery
