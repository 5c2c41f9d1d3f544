#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cropemu/nn/loss.hpp"
#include "cropemu/nn/serialize.hpp"
#include "cropemu/weather/series.hpp"

namespace cropemu::weather {

enum class AeKind { TempRad, Rain };

struct AeHyper {
  double learningRate = 1e-3;
  double weightDecay = 3e-4;
  std::size_t latent = 10;
  std::size_t batchSize = 96;
  std::size_t maxEpochs = 500;
  int schedulerPatience = 8;
  double schedulerFactor = 0.5;
  double minLearningRate = 1e-5;
  std::uint64_t seed = 1;

  static AeHyper temprad_defaults();
  static AeHyper rain_defaults();
};

// Per-channel z-score statistics of the encoder input.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> std;
};

// A trained encoder/decoder pair.
//   TempRad: channels (maxT, maxT - minT, radn) -> latent -> same channels.
//   Rain:    log1p(rain) -> latent -> (occurrence logit, log1p intensity).
struct Autoencoder {
  AeKind kind = AeKind::TempRad;
  nn::TrainedNetwork encoder;
  nn::TrainedNetwork decoder;
  ChannelStats norm;
  std::vector<double> epochLoss;  // mean training loss per epoch
  std::vector<double> bestLoss;   // best-so-far loss per epoch

  std::size_t latent_size() const { return decoder.net.input_shape()[0]; }
  // Encoder input tensor (N, C, 365), already normalized.
  nn::Tensor encoder_input(const std::vector<const WeatherSeries*>& series) const;
  // Latent rows (N, latent), eval mode.
  nn::Tensor encode(const std::vector<const WeatherSeries*>& series) const;
  // Raw decoder output (N, C, 365), eval mode.
  nn::Tensor decode(const nn::Tensor& latent) const;
};

nn::NetworkSpec encoder_spec(std::size_t channels, std::size_t latent);
nn::NetworkSpec decoder_spec(std::size_t latent, std::size_t channels);

// Throws InputError on an empty corpus.
Autoencoder train_temprad_ae(const std::vector<WeatherSeries>& corpus, const AeHyper& hyper);
Autoencoder train_rain_ae(const std::vector<WeatherSeries>& corpus, const AeHyper& hyper);

struct LatentCode {
  std::array<double, 10> tempRad{};
  std::array<double, 6> rain{};
  bool operator==(const LatentCode&) const = default;
};

// The two models used together: series <-> LatentCode.
struct WeatherModel {
  Autoencoder tempRad;
  Autoencoder rain;

  std::vector<LatentCode> encode(const std::vector<WeatherSeries>& series) const;
  // Decodes codes into series carrying the given metadata. Occurrence is
  // thresholded at 0.5; wet-day amounts are expm1 of the intensity head,
  // floored at 0.1 mm; the diurnal range is clamped at zero.
  std::vector<WeatherSeries> decode(const std::vector<LatentCode>& codes,
                                    const std::vector<WeatherSeries>& metadata) const;
};

void save_weather_model(const WeatherModel& model, const std::filesystem::path& path);
WeatherModel load_weather_model(const std::filesystem::path& path);

}  // namespace cropemu::weather
