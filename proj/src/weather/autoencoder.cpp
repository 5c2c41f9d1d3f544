#include "cropemu/weather/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include "cropemu/error.hpp"
#include "cropemu/nn/optimizer.hpp"
#include "cropemu/random.hpp"

namespace cropemu::weather {
namespace {

constexpr std::size_t kDays = kDaysPerYear;
constexpr std::size_t kBottleneck = 46;  // 365 -> 183 -> 92 -> 46
constexpr std::size_t kWidest = 64;
constexpr char kMagic[9] = "CEWEATHR";
constexpr std::uint64_t kVersion = 1;

std::size_t channel_count(AeKind kind) { return kind == AeKind::TempRad ? 3 : 1; }

double channel_value(AeKind kind, const WeatherDay& d, std::size_t c) {
  if (kind == AeKind::Rain) return std::log1p(d.rain);
  switch (c) {
    case 0: return d.maxT;
    case 1: return d.maxT - d.minT;
    default: return d.radn;
  }
}

ChannelStats fit_stats(AeKind kind, const std::vector<WeatherSeries>& corpus) {
  const std::size_t C = channel_count(kind);
  ChannelStats s{std::vector<double>(C, 0.0), std::vector<double>(C, 0.0)};
  const double n = static_cast<double>(corpus.size() * kDays);
  for (const auto& series : corpus)
    for (const auto& d : series.days)
      for (std::size_t c = 0; c < C; ++c) s.mean[c] += channel_value(kind, d, c) / n;
  for (const auto& series : corpus)
    for (const auto& d : series.days)
      for (std::size_t c = 0; c < C; ++c) s.std[c] += std::pow(channel_value(kind, d, c) - s.mean[c], 2) / n;
  for (auto& v : s.std) v = v > 0 ? std::sqrt(v) : 1.0;
  return s;
}

nn::Tensor build_input(AeKind kind, const ChannelStats& norm, const std::vector<const WeatherSeries*>& series) {
  const std::size_t C = channel_count(kind);
  nn::Tensor x({series.size(), C, kDays});
  for (std::size_t n = 0; n < series.size(); ++n) {
    if (series[n]->days.size() != kDays) throw InputError("weather series must have 365 days");
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < kDays; ++t)
        x.values[(n * C + c) * kDays + t] = (channel_value(kind, series[n]->days[t], c) - norm.mean[c]) / norm.std[c];
  }
  return x;
}

// Loss over a decoded batch; returns the value and fills the output gradient.
using BatchLoss = std::function<double(const nn::Tensor& output, std::span<const std::size_t> rows, nn::Tensor& grad)>;

void train(Autoencoder& ae, const nn::Tensor& inputs, const AeHyper& h, const BatchLoss& loss) {
  const std::size_t N = inputs.batch();
  nn::TrainedNetwork& enc = ae.encoder;
  nn::TrainedNetwork& dec = ae.decoder;
  enc.params = enc.net.initial_parameters(derive_seed(h.seed, 1));
  dec.params = dec.net.initial_parameters(derive_seed(h.seed, 2));
  enc.stats = enc.net.initial_running_stats();
  dec.stats = dec.net.initial_running_stats();

  nn::OptimizerConfig opt{nn::OptimizerKind::AdaptiveMoment, h.learningRate, 0.0, h.weightDecay};
  nn::validate(opt);
  nn::OptimizerState encState, decState;
  nn::SchedulerState sched;
  sched.patience = h.schedulerPatience;
  sched.reductionFactor = h.schedulerFactor;
  sched.minLearningRate = h.minLearningRate;

  Rng rng(derive_seed(h.seed, 3));
  const std::size_t batch = std::max<std::size_t>(1, std::min(h.batchSize, N));
  nn::TrainedNetwork bestEnc = enc, bestDec = dec;
  double best = INFINITY;
  std::vector<double> gEnc(enc.params.size()), gDec(dec.params.size());

  for (std::size_t epoch = 0; epoch < h.maxEpochs; ++epoch) {
    const std::vector<std::size_t> order = permutation(N, rng);
    double total = 0;
    for (std::size_t start = 0; start < N; start += batch) {
      const std::size_t stop = std::min(N, start + batch);
      std::span<const std::size_t> rows(order.data() + start, stop - start);
      const nn::Tensor x = inputs.gather_rows(rows);
      nn::Tape encTape, decTape;
      const nn::Tensor z = enc.net.forward(enc.params, x, nn::Mode::Train, enc.stats, &encTape);
      const nn::Tensor y = dec.net.forward(dec.params, z, nn::Mode::Train, dec.stats, &decTape);
      nn::Tensor dy(y.shape);
      total += loss(y, rows, dy) * static_cast<double>(rows.size());
      std::fill(gEnc.begin(), gEnc.end(), 0.0);
      std::fill(gDec.begin(), gDec.end(), 0.0);
      const nn::Tensor dz = dec.net.backward(dec.params, decTape, dy, gDec);
      enc.net.backward(enc.params, encTape, dz, gEnc);
      nn::optimizer_step(opt, enc.params, gEnc, encState);
      nn::optimizer_step(opt, dec.params, gDec, decState);
    }
    const double epochLoss = total / static_cast<double>(N);
    if (!std::isfinite(epochLoss)) throw NumericError("autoencoder loss diverged at epoch " + std::to_string(epoch + 1));
    if (epochLoss < best) {
      best = epochLoss;
      bestEnc = enc;
      bestDec = dec;
    }
    ae.epochLoss.push_back(epochLoss);
    ae.bestLoss.push_back(best);
    opt.learningRate = nn::scheduler_step(sched, epochLoss, opt.learningRate);
  }
  enc = std::move(bestEnc);
  dec = std::move(bestDec);
  // Replace the momentum-averaged batch-norm statistics with exact ones for
  // the final weights.
  const nn::Tensor z = enc.net.forward(enc.params, inputs, nn::Mode::RefreshStats, enc.stats);
  dec.net.forward(dec.params, z, nn::Mode::RefreshStats, dec.stats);
}

Autoencoder make(AeKind kind, const std::vector<WeatherSeries>& corpus, const AeHyper& h, std::size_t outChannels) {
  if (corpus.empty()) throw InputError("cannot train a weather autoencoder on an empty corpus");
  if (h.latent == 0) throw ConfigError("latent size must be positive");
  for (const auto& s : corpus) validate(s);
  Autoencoder ae;
  ae.kind = kind;
  const std::size_t C = channel_count(kind);
  ae.encoder.net = nn::Network(encoder_spec(C, h.latent), {C, kDays});
  ae.decoder.net = nn::Network(decoder_spec(h.latent, outChannels), {h.latent});
  ae.norm = fit_stats(kind, corpus);
  return ae;
}

std::vector<const WeatherSeries*> pointers(const std::vector<WeatherSeries>& v) {
  std::vector<const WeatherSeries*> p;
  p.reserve(v.size());
  for (const auto& s : v) p.push_back(&s);
  return p;
}

void write_ae(nn::BinaryWriter& w, const Autoencoder& ae) {
  w.u64(static_cast<std::uint64_t>(ae.kind));
  nn::write_trained(w, ae.encoder);
  nn::write_trained(w, ae.decoder);
  w.doubles(ae.norm.mean);
  w.doubles(ae.norm.std);
  w.doubles(ae.epochLoss);
  w.doubles(ae.bestLoss);
}

Autoencoder read_ae(nn::BinaryReader& r) {
  Autoencoder ae;
  const std::uint64_t kind = r.u64();
  if (kind > 1) throw ParseError(r.source() + ": unknown autoencoder kind");
  ae.kind = static_cast<AeKind>(kind);
  ae.encoder = nn::read_trained(r);
  ae.decoder = nn::read_trained(r);
  ae.norm.mean = r.doubles();
  ae.norm.std = r.doubles();
  ae.epochLoss = r.doubles();
  ae.bestLoss = r.doubles();
  return ae;
}

}  // namespace

AeHyper AeHyper::temprad_defaults() { return AeHyper{}; }

AeHyper AeHyper::rain_defaults() {
  AeHyper h;
  h.learningRate = 5e-4;
  h.weightDecay = 1e-4;
  h.latent = 6;
  return h;
}

nn::NetworkSpec encoder_spec(std::size_t channels, std::size_t latent) {
  using nn::LayerSpec;
  return nn::NetworkSpec{{
      LayerSpec::conv1d(channels, 16, 7, 2, 3), LayerSpec::batchnorm1d(16), LayerSpec::relu(),
      LayerSpec::conv1d(16, 32, 7, 2, 3), LayerSpec::batchnorm1d(32), LayerSpec::relu(),
      LayerSpec::conv1d(32, kWidest, 7, 2, 3), LayerSpec::batchnorm1d(kWidest), LayerSpec::relu(),
      LayerSpec::dense(kWidest * kBottleneck, latent)}};
}

nn::NetworkSpec decoder_spec(std::size_t latent, std::size_t channels) {
  using nn::LayerSpec;
  return nn::NetworkSpec{{
      LayerSpec::dense(latent, kWidest * kBottleneck), LayerSpec::relu(), LayerSpec::reshape(kWidest, kBottleneck),
      LayerSpec::upsample1d(2), LayerSpec::conv1d(kWidest, 32, 7, 1, 3), LayerSpec::batchnorm1d(32), LayerSpec::relu(),
      LayerSpec::upsample1d(2), LayerSpec::conv1d(32, 16, 7, 1, 3), LayerSpec::batchnorm1d(16), LayerSpec::relu(),
      LayerSpec::upsample1d(2), LayerSpec::conv1d(16, channels, 7, 1, 3), LayerSpec::crop1d(kDays)}};
}

nn::Tensor Autoencoder::encoder_input(const std::vector<const WeatherSeries*>& series) const {
  return build_input(kind, norm, series);
}

nn::Tensor Autoencoder::encode(const std::vector<const WeatherSeries*>& series) const {
  if (series.empty()) return nn::Tensor({0, latent_size()});
  std::vector<double> stats = encoder.stats;
  return encoder.net.forward(encoder.params, encoder_input(series), nn::Mode::Eval, stats);
}

nn::Tensor Autoencoder::decode(const nn::Tensor& latent) const {
  std::vector<double> stats = decoder.stats;
  return decoder.net.forward(decoder.params, latent, nn::Mode::Eval, stats);
}

Autoencoder train_temprad_ae(const std::vector<WeatherSeries>& corpus, const AeHyper& h) {
  Autoencoder ae = make(AeKind::TempRad, corpus, h, 3);
  const nn::Tensor inputs = ae.encoder_input(pointers(corpus));
  train(ae, inputs, h, [&](const nn::Tensor& y, std::span<const std::size_t> rows, nn::Tensor& grad) {
    const nn::Tensor target = inputs.gather_rows(rows);
    nn::LossResult r = nn::compute_loss(nn::LossKind::Mse, y, target);
    grad = std::move(r.gradient);
    return r.value;
  });
  return ae;
}

Autoencoder train_rain_ae(const std::vector<WeatherSeries>& corpus, const AeHyper& h) {
  Autoencoder ae = make(AeKind::Rain, corpus, h, 2);
  const nn::Tensor inputs = ae.encoder_input(pointers(corpus));
  train(ae, inputs, h, [&](const nn::Tensor& y, std::span<const std::size_t> rows, nn::Tensor& grad) {
    const double cells = static_cast<double>(rows.size() * kDays);
    std::size_t wet = 0;
    for (std::size_t r : rows)
      for (const auto& d : corpus[r].days) wet += d.rain > 0;
    double bce = 0, mse = 0;
    for (std::size_t n = 0; n < rows.size(); ++n) {
      const auto& days = corpus[rows[n]].days;
      for (std::size_t t = 0; t < kDays; ++t) {
        const std::size_t occ = (n * 2) * kDays + t, amt = (n * 2 + 1) * kDays + t;
        const double logit = y.values[occ];
        const double o = days[t].rain > 0 ? 1.0 : 0.0;
        // Binary cross-entropy on the logit, in its overflow-safe form.
        bce += std::max(logit, 0.0) - logit * o + std::log1p(std::exp(-std::abs(logit)));
        grad.values[occ] = (1.0 / (1.0 + std::exp(-logit)) - o) / cells;
        grad.values[amt] = 0.0;
        if (o > 0) {
          const double e = y.values[amt] - std::log1p(days[t].rain);
          mse += e * e;
          grad.values[amt] = 2.0 * e / static_cast<double>(wet);
        }
      }
    }
    return bce / cells + (wet > 0 ? mse / static_cast<double>(wet) : 0.0);
  });
  return ae;
}

std::vector<LatentCode> WeatherModel::encode(const std::vector<WeatherSeries>& series) const {
  const auto ptrs = pointers(series);
  const nn::Tensor a = tempRad.encode(ptrs);
  const nn::Tensor b = rain.encode(ptrs);
  if (tempRad.latent_size() != 10 || rain.latent_size() != 6) {
    throw ConfigError("weather model latents must be 10 (temperature-radiation) and 6 (rain)");
  }
  std::vector<LatentCode> codes(series.size());
  for (std::size_t n = 0; n < series.size(); ++n) {
    std::copy_n(a.values.begin() + static_cast<std::ptrdiff_t>(n * 10), 10, codes[n].tempRad.begin());
    std::copy_n(b.values.begin() + static_cast<std::ptrdiff_t>(n * 6), 6, codes[n].rain.begin());
  }
  return codes;
}

std::vector<WeatherSeries> WeatherModel::decode(const std::vector<LatentCode>& codes,
                                                const std::vector<WeatherSeries>& metadata) const {
  if (codes.size() != metadata.size()) throw InputError("decode needs one metadata record per code");
  const std::size_t N = codes.size();
  nn::Tensor za({N, 10}), zb({N, 6});
  for (std::size_t n = 0; n < N; ++n) {
    std::copy(codes[n].tempRad.begin(), codes[n].tempRad.end(), za.values.begin() + static_cast<std::ptrdiff_t>(n * 10));
    std::copy(codes[n].rain.begin(), codes[n].rain.end(), zb.values.begin() + static_cast<std::ptrdiff_t>(n * 6));
  }
  const nn::Tensor ya = tempRad.decode(za);
  const nn::Tensor yb = rain.decode(zb);
  const auto& m = tempRad.norm;
  std::vector<WeatherSeries> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    WeatherSeries& s = out[n];
    s.location = metadata[n].location;
    s.lat = metadata[n].lat;
    s.lon = metadata[n].lon;
    s.year = metadata[n].year;
    s.sourceTag = metadata[n].sourceTag;
    s.days.resize(kDays);
    for (std::size_t t = 0; t < kDays; ++t) {
      const double maxT = ya.values[(n * 3 + 0) * kDays + t] * m.std[0] + m.mean[0];
      const double range = std::max(0.0, ya.values[(n * 3 + 1) * kDays + t] * m.std[1] + m.mean[1]);
      const double radn = std::max(0.0, ya.values[(n * 3 + 2) * kDays + t] * m.std[2] + m.mean[2]);
      const bool wet = yb.values[(n * 2) * kDays + t] >= 0.0;  // probability >= 0.5
      const double amount = std::max(0.1, std::expm1(yb.values[(n * 2 + 1) * kDays + t]));
      s.days[t] = WeatherDay{radn, maxT, maxT - range, wet ? amount : 0.0};
    }
  }
  return out;
}

void save_weather_model(const WeatherModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  nn::BinaryWriter w(out);
  nn::write_header(w, kMagic, kVersion);
  write_ae(w, model.tempRad);
  write_ae(w, model.rain);
  if (!out) throw InputError("failed writing " + path.string());
}

WeatherModel load_weather_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open weather model " + path.string());
  nn::BinaryReader r(in, path.string());
  r.expect_header(kMagic, kVersion);
  WeatherModel m;
  m.tempRad = read_ae(r);
  m.rain = read_ae(r);
  return m;
}

}  // namespace cropemu::weather
