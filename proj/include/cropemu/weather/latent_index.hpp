#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cropemu/weather/autoencoder.hpp"

namespace cropemu::weather {

inline constexpr std::size_t kLatentDims = 16;
inline constexpr std::size_t kIndexDims = kLatentDims + 1;  // plus latitude

struct LatentEntry {
  LatentCode code;
  std::string location;
  double lat = 0;
  double lon = 0;
  int year = 0;
};

std::array<double, kLatentDims> flatten(const LatentCode& code);
LatentCode unflatten(const std::array<double, kLatentDims>& v);

// Encoded corpus with z-scored coordinates (16 latents + latitude); the
// latitude column is multiplied by latitudeWeight after z-scoring. Immutable.
class LatentIndex {
 public:
  // Throws InputError on an empty entry list, ConfigError when
  // latitudeWeight <= 0.
  LatentIndex(std::vector<LatentEntry> entries, double latitudeWeight = 3.0);

  const std::vector<LatentEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double latitude_weight() const { return latitudeWeight_; }
  const std::array<double, kIndexDims>& mean() const { return mean_; }
  const std::array<double, kIndexDims>& std() const { return std_; }
  const std::array<double, kIndexDims>& normalized(std::size_t i) const { return normalized_[i]; }

  // The k entries nearest to `anchor` (anchor excluded), by Euclidean
  // distance in normalized space, ties by lower index. With sameLocation only
  // entries sharing the anchor's location are candidates. Throws
  // ConfigError when fewer than k candidates exist.
  std::vector<std::size_t> nearest(std::size_t anchor, std::size_t k, bool sameLocation = false) const;

 private:
  std::vector<LatentEntry> entries_;
  double latitudeWeight_;
  std::array<double, kIndexDims> mean_{};
  std::array<double, kIndexDims> std_{};
  std::vector<std::array<double, kIndexDims>> normalized_;
};

struct SynthOptions {
  std::size_t count = 0;
  std::size_t k = 5;
  bool sameLocation = false;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  LatentCode code;
  std::size_t anchor = 0;
  std::vector<std::size_t> members;  // anchor first, then its neighbors
  std::vector<double> weights;       // flat Dirichlet over members
  WeatherSeries series;              // filled by synth_generate
};

// Weighted sum of the members' codes. Throws InputError unless the weights
// are nonnegative, sum to 1 within 1e-9 and match the member count.
LatentCode combine_codes(const LatentIndex& index, const std::vector<std::size_t>& members,
                         const std::vector<double>& weights);

// Convex combinations of an anchor and its k nearest neighbors. Throws
// ConfigError when k >= index size.
std::vector<SyntheticSample> synth_latents(const LatentIndex& index, const SynthOptions& options);

// synth_latents followed by decoding. Each series takes its anchor's
// location and coordinates, year = sample number (1-based) and the
// synthetic source tag.
std::vector<SyntheticSample> synth_generate(const LatentIndex& index, const WeatherModel& model,
                                            const SynthOptions& options);

}  // namespace cropemu::weather
