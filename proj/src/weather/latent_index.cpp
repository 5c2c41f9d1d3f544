#include "cropemu/weather/latent_index.hpp"

#include <algorithm>
#include <cmath>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::weather {

std::array<double, kLatentDims> flatten(const LatentCode& code) {
  std::array<double, kLatentDims> v{};
  std::copy(code.tempRad.begin(), code.tempRad.end(), v.begin());
  std::copy(code.rain.begin(), code.rain.end(), v.begin() + 10);
  return v;
}

LatentCode unflatten(const std::array<double, kLatentDims>& v) {
  LatentCode c;
  std::copy_n(v.begin(), 10, c.tempRad.begin());
  std::copy_n(v.begin() + 10, 6, c.rain.begin());
  return c;
}

LatentIndex::LatentIndex(std::vector<LatentEntry> entries, double latitudeWeight)
    : entries_(std::move(entries)), latitudeWeight_(latitudeWeight) {
  if (entries_.empty()) throw InputError("latent index needs at least one entry");
  if (!(latitudeWeight > 0)) throw ConfigError("latitudeWeight must be positive");
  const double n = static_cast<double>(entries_.size());
  std::vector<std::array<double, kIndexDims>> raw(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto flat = flatten(entries_[i].code);
    std::copy(flat.begin(), flat.end(), raw[i].begin());
    raw[i][kLatentDims] = entries_[i].lat;
    for (double v : raw[i])
      if (!std::isfinite(v)) throw InputError("non-finite latent code in index entry " + std::to_string(i));
  }
  for (std::size_t d = 0; d < kIndexDims; ++d) {
    double m = 0, s = 0;
    for (const auto& r : raw) m += r[d];
    m /= n;
    for (const auto& r : raw) s += (r[d] - m) * (r[d] - m);
    s = std::sqrt(s / n);
    mean_[d] = m;
    std_[d] = s > 0 ? s : 1.0;
  }
  normalized_.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t d = 0; d < kIndexDims; ++d) normalized_[i][d] = (raw[i][d] - mean_[d]) / std_[d];
    normalized_[i][kLatentDims] *= latitudeWeight_;
  }
}

std::vector<std::size_t> LatentIndex::nearest(std::size_t anchor, std::size_t k, bool sameLocation) const {
  std::vector<std::pair<double, std::size_t>> candidates;
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    if (j == anchor) continue;
    if (sameLocation && entries_[j].location != entries_[anchor].location) continue;
    double d2 = 0;
    for (std::size_t d = 0; d < kIndexDims; ++d) d2 += std::pow(normalized_[j][d] - normalized_[anchor][d], 2);
    candidates.emplace_back(d2, j);
  }
  if (candidates.size() < k) {
    throw ConfigError("neighbor count k=" + std::to_string(k) + " exceeds the " + std::to_string(candidates.size()) +
                      " candidates available");
  }
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(candidates[i].second);
  return out;
}

LatentCode combine_codes(const LatentIndex& index, const std::vector<std::size_t>& members,
                         const std::vector<double>& weights) {
  if (members.size() != weights.size() || members.empty()) throw InputError("one weight per member required");
  double total = 0;
  for (double w : weights) {
    if (!(w >= 0)) throw InputError("convex weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("convex weights must sum to 1");
  std::array<double, kLatentDims> z{};
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m] >= index.size()) throw InputError("member index out of range");
    const auto v = flatten(index.entries()[members[m]].code);
    for (std::size_t d = 0; d < kLatentDims; ++d) z[d] += weights[m] * v[d];
  }
  return unflatten(z);
}

std::vector<SyntheticSample> synth_latents(const LatentIndex& index, const SynthOptions& o) {
  if (o.k >= index.size()) {
    throw ConfigError("neighbor count k=" + std::to_string(o.k) + " must be below the corpus size " +
                      std::to_string(index.size()));
  }
  Rng rng(derive_seed(o.seed, 0x5ee0));
  std::vector<SyntheticSample> out(o.count);
  for (auto& s : out) {
    s.anchor = uniform_index(rng, index.size());
    s.members = {s.anchor};
    const auto nn = index.nearest(s.anchor, o.k, o.sameLocation);
    s.members.insert(s.members.end(), nn.begin(), nn.end());
    double total = 0;
    for (std::size_t m = 0; m < s.members.size(); ++m) {
      s.weights.push_back(-std::log1p(-uniform01(rng)));
      total += s.weights.back();
    }
    for (double& w : s.weights) w /= total;
    s.code = combine_codes(index, s.members, s.weights);
  }
  return out;
}

std::vector<SyntheticSample> synth_generate(const LatentIndex& index, const WeatherModel& model,
                                            const SynthOptions& options) {
  std::vector<SyntheticSample> samples = synth_latents(index, options);
  std::vector<LatentCode> codes;
  std::vector<WeatherSeries> meta;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LatentEntry& a = index.entries()[samples[i].anchor];
    WeatherSeries m;
    m.location = a.location;
    m.lat = a.lat;
    m.lon = a.lon;
    m.year = static_cast<int>(i + 1);
    m.sourceTag = SourceTag::Synthetic;
    meta.push_back(std::move(m));
    codes.push_back(samples[i].code);
  }
  std::vector<WeatherSeries> decoded = model.decode(codes, meta);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    validate(decoded[i]);
    samples[i].series = std::move(decoded[i]);
  }
  return samples;
}

}  // namespace cropemu::weather
