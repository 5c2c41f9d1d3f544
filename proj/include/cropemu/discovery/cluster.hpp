#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cropemu/nn/tensor.hpp"

namespace cropemu::discovery {

struct KMeansOptions {
  std::size_t k = 4;
  std::size_t restarts = 10;
  std::size_t maxIterations = 300;
  std::uint64_t seed = 1;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;          // per point
  nn::Tensor centroids;                         // k x d, raw units
  double sse = 0;                               // within-cluster SSE on the z-scored scale
  std::vector<std::vector<double>> sseHistory;  // per restart, SSE after each Lloyd iteration
  std::size_t bestRestart = 0;
};

// Lloyd iterations on z-scored columns (constant columns left unscaled),
// k-means++ seeding, best restart by SSE. An emptied cluster takes the point
// farthest from its centroid. Throws ConfigError when points < k or k == 0.
KMeansResult kmeans_cluster(const nn::Tensor& points, const KMeansOptions& options);

struct ClusterProfile {
  std::size_t size = 0;
  std::vector<double> traitMeans;  // raw units, one per trait column
  double yieldMean = 0;            // over members and environments
  double yieldStd = 0;
};

struct ClusterSummary {
  std::vector<std::string> traitNames;
  std::vector<ClusterProfile> clusters;
  std::map<std::string, std::size_t> bestClusterPerLocation;
};

// yields[i][e] is the predicted yield of point i in environment e, and
// envLocations[e] names that environment's location.
ClusterSummary summarize_clusters(const KMeansResult& result, const nn::Tensor& points,
                                  const std::vector<std::string>& traitNames,
                                  const std::vector<std::vector<double>>& yields,
                                  const std::vector<std::string>& envLocations);

}  // namespace cropemu::discovery
