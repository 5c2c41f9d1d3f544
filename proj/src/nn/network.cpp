#include "cropemu/nn/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "cropemu/error.hpp"
#include "cropemu/random.hpp"

namespace cropemu::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

std::string layer_label(std::size_t index, const LayerSpec& layer) {
  return "layer " + std::to_string(index) + " (" + to_string(layer.kind) + ")";
}

// Channel count and length of a {C, L} or {F} sample shape; {F} is treated as
// F channels of length 1 for batch norm.
std::pair<std::size_t, std::size_t> channels_and_length(const std::vector<std::size_t>& shape) {
  if (shape.size() == 1) return {shape[0], 1};
  if (shape.size() == 2) return {shape[0], shape[1]};
  throw ConfigError("expected a {features} or {channels, length} shape, got " +
                    shape_to_string(shape));
}

// Lowers a (N, Cin, L) batch into a (Cin*K) x (N*Lout) column matrix.
ColMat im2col(const Tensor& x, const LayerSpec& l, std::size_t len_in, std::size_t len_out) {
  const std::size_t n = x.batch();
  ColMat col = ColMat::Zero(static_cast<Eigen::Index>(l.channelsIn * l.kernelWidth),
                            static_cast<Eigen::Index>(n * len_out));
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x.values.data() + s * l.channelsIn * len_in;
    for (std::size_t t = 0; t < len_out; ++t) {
      const auto c = static_cast<Eigen::Index>(s * len_out + t);
      const long start = static_cast<long>(t * l.stride) - static_cast<long>(l.padding);
      for (std::size_t ci = 0; ci < l.channelsIn; ++ci) {
        for (std::size_t k = 0; k < l.kernelWidth; ++k) {
          const long pos = start + static_cast<long>(k);
          if (pos >= 0 && pos < static_cast<long>(len_in)) {
            col(static_cast<Eigen::Index>(ci * l.kernelWidth + k), c) =
                xs[ci * len_in + static_cast<std::size_t>(pos)];
          }
        }
      }
    }
  }
  return col;
}

void check_finite(const Tensor& t, std::size_t index, const LayerSpec& layer) {
  for (double v : t.values) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite activation at " + layer_label(index, layer));
    }
  }
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::BatchNorm1d: return "batchnorm1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Upsample1d: return "upsample1d";
    case LayerKind::Crop1d: return "crop1d";
    case LayerKind::Reshape: return "reshape";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.inputSize = in;
  l.outputSize = out;
  return l;
}

LayerSpec LayerSpec::conv1d(std::size_t cin, std::size_t cout, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec l;
  l.kind = LayerKind::Conv1d;
  l.channelsIn = cin;
  l.channelsOut = cout;
  l.kernelWidth = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::batchnorm1d(std::size_t features, double momentum, double epsilon) {
  LayerSpec l;
  l.kind = LayerKind::BatchNorm1d;
  l.featureCount = features;
  l.momentum = momentum;
  l.epsilon = epsilon;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::sigmoid() {
  LayerSpec l;
  l.kind = LayerKind::Sigmoid;
  return l;
}

LayerSpec LayerSpec::upsample1d(std::size_t factor) {
  LayerSpec l;
  l.kind = LayerKind::Upsample1d;
  l.factor = factor;
  return l;
}

LayerSpec LayerSpec::crop1d(std::size_t length) {
  LayerSpec l;
  l.kind = LayerKind::Crop1d;
  l.length = length;
  return l;
}

LayerSpec LayerSpec::reshape(std::size_t channels, std::size_t length) {
  LayerSpec l;
  l.kind = LayerKind::Reshape;
  l.channels = channels;
  l.length = length;
  return l;
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::Dense: return inputSize * outputSize + outputSize;
    case LayerKind::Conv1d: return channelsOut * channelsIn * kernelWidth + channelsOut;
    case LayerKind::BatchNorm1d: return 2 * featureCount;
    default: return 0;
  }
}

std::size_t LayerSpec::running_stat_count() const {
  return kind == LayerKind::BatchNorm1d ? 2 * featureCount : 0;
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.parameter_count();
  return total;
}

Network::Network(NetworkSpec spec, std::vector<std::size_t> sample_shape)
    : spec_(std::move(spec)), input_shape_(std::move(sample_shape)) {
  if (input_shape_.empty()) throw ConfigError("network input shape must be non-empty");
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const auto& in = shapes_.back();
    std::vector<std::size_t> out;
    const std::string where = layer_label(i, l);
    switch (l.kind) {
      case LayerKind::Dense:
        if (shape_product(in) != l.inputSize || l.inputSize == 0 || l.outputSize == 0) {
          throw ConfigError(where + ": input shape " + shape_to_string(in) +
                            " does not match inputSize " + std::to_string(l.inputSize));
        }
        out = {l.outputSize};
        break;
      case LayerKind::Conv1d: {
        if (l.kernelWidth < 1 || l.stride < 1 || l.channelsIn == 0 || l.channelsOut == 0) {
          throw ConfigError(where + ": kernelWidth, stride and channel counts must be >= 1");
        }
        if (in.size() != 2 || in[0] != l.channelsIn) {
          throw ConfigError(where + ": expected {" + std::to_string(l.channelsIn) +
                            ", L} input, got " + shape_to_string(in));
        }
        const std::size_t padded = in[1] + 2 * l.padding;
        if (padded < l.kernelWidth) throw ConfigError(where + ": kernel wider than input");
        out = {l.channelsOut, (padded - l.kernelWidth) / l.stride + 1};
        break;
      }
      case LayerKind::BatchNorm1d: {
        if (!(l.epsilon > 0.0) || !(l.momentum > 0.0 && l.momentum < 1.0)) {
          throw ConfigError(where + ": epsilon must be > 0 and momentum in (0,1)");
        }
        auto [c, len] = channels_and_length(in);
        (void)len;
        if (c != l.featureCount) {
          throw ConfigError(where + ": featureCount " + std::to_string(l.featureCount) +
                            " does not match input " + shape_to_string(in));
        }
        out = in;
        break;
      }
      case LayerKind::Relu:
      case LayerKind::Sigmoid:
        out = in;
        break;
      case LayerKind::Upsample1d:
        if (in.size() != 2 || l.factor < 1) {
          throw ConfigError(where + ": needs a {C, L} input and factor >= 1");
        }
        out = {in[0], in[1] * l.factor};
        break;
      case LayerKind::Crop1d:
        if (in.size() != 2 || l.length == 0 || l.length > in[1]) {
          throw ConfigError(where + ": crop length must be in [1, " +
                            (in.size() == 2 ? std::to_string(in[1]) : std::string("L")) + "]");
        }
        out = {in[0], l.length};
        break;
      case LayerKind::Reshape:
        if (shape_product(in) != l.channels * l.length || l.channels == 0) {
          throw ConfigError(where + ": cannot reshape " + shape_to_string(in) + " to {" +
                            std::to_string(l.channels) + "," + std::to_string(l.length) + "}");
        }
        out = {l.channels, l.length};
        break;
    }
    param_offsets_.push_back(parameter_count_);
    stat_offsets_.push_back(stat_count_);
    parameter_count_ += l.parameter_count();
    stat_count_ += l.running_stat_count();
    shapes_.push_back(std::move(out));
  }
}

std::vector<double> Network::initial_parameters(std::uint64_t seed) const {
  std::vector<double> params(parameter_count_, 0.0);
  Rng rng(seed);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    double* p = params.data() + param_offsets_[i];
    std::size_t weights = 0;
    double fan_in = 0, fan_out = 0;
    if (l.kind == LayerKind::Dense) {
      weights = l.inputSize * l.outputSize;
      fan_in = static_cast<double>(l.inputSize);
      fan_out = static_cast<double>(l.outputSize);
    } else if (l.kind == LayerKind::Conv1d) {
      weights = l.channelsOut * l.channelsIn * l.kernelWidth;
      fan_in = static_cast<double>(l.channelsIn * l.kernelWidth);
      fan_out = static_cast<double>(l.channelsOut * l.kernelWidth);
    } else if (l.kind == LayerKind::BatchNorm1d) {
      std::fill(p, p + l.featureCount, 1.0);
      continue;
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t w = 0; w < weights; ++w) p[w] = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  return params;
}

std::vector<double> Network::initial_running_stats() const {
  std::vector<double> stats(stat_count_, 0.0);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.kind != LayerKind::BatchNorm1d) continue;
    std::fill_n(stats.begin() + static_cast<std::ptrdiff_t>(stat_offsets_[i] + l.featureCount),
                l.featureCount, 1.0);
  }
  return stats;
}

void Network::check_batch(const Tensor& batch) const {
  if (batch.rank() != input_shape_.size() + 1 ||
      !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape.begin() + 1) ||
      batch.batch() == 0) {
    throw ConfigError("batch shape " + shape_to_string(batch.shape) +
                      " does not match network input " + shape_to_string(input_shape_));
  }
}

Tensor Network::forward(std::span<const double> params, const Tensor& batch, Mode mode,
                        std::span<double> running_stats, Tape* tape) const {
  if (params.size() != parameter_count_) {
    throw ConfigError("parameter vector has " + std::to_string(params.size()) +
                      " entries, network expects " + std::to_string(parameter_count_));
  }
  if (!running_stats.empty() && running_stats.size() != stat_count_) {
    throw ConfigError("running statistics length mismatch");
  }
  check_batch(batch);
  const std::size_t n = batch.batch();
  if (tape) {
    tape->inputs.clear();
    tape->aux.assign(spec_.layers.size(), {});
  }

  Tensor x = batch;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const double* p = params.data() + param_offsets_[i];
    std::vector<std::size_t> out_shape{n};
    out_shape.insert(out_shape.end(), shapes_[i + 1].begin(), shapes_[i + 1].end());
    Tensor y(out_shape);

    switch (l.kind) {
      case LayerKind::Dense: {
        ConstRowMap xin(x.values.data(), static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(l.inputSize));
        ConstRowMap w(p, static_cast<Eigen::Index>(l.outputSize),
                      static_cast<Eigen::Index>(l.inputSize));
        ConstVecMap b(p + l.inputSize * l.outputSize, static_cast<Eigen::Index>(l.outputSize));
        RowMap yout(y.values.data(), static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(l.outputSize));
        yout.noalias() = xin * w.transpose();
        yout.rowwise() += b.transpose();
        break;
      }
      case LayerKind::Conv1d: {
        const std::size_t len_in = shapes_[i][1];
        const std::size_t len_out = shapes_[i + 1][1];
        const ColMat col = im2col(x, l, len_in, len_out);
        ConstRowMap w(p, static_cast<Eigen::Index>(l.channelsOut),
                      static_cast<Eigen::Index>(l.channelsIn * l.kernelWidth));
        const double* b = p + l.channelsOut * l.channelsIn * l.kernelWidth;
        ColMat out = w * col;
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t co = 0; co < l.channelsOut; ++co) {
            double* dst = y.values.data() + (s * l.channelsOut + co) * len_out;
            for (std::size_t t = 0; t < len_out; ++t) {
              dst[t] = out(static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(s * len_out + t)) + b[co];
            }
          }
        }
        break;
      }
      case LayerKind::BatchNorm1d: {
        const auto [c, len] = channels_and_length(shapes_[i]);
        const double* gamma = p;
        const double* beta = p + c;
        const double count = static_cast<double>(n * len);
        std::vector<double> mean(c, 0.0), var(c, 0.0);
        double* stats = running_stats.empty() ? nullptr : running_stats.data() + stat_offsets_[i];
        const bool batch_stats = mode != Mode::Eval;
        if (batch_stats) {
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t t = 0; t < len; ++t) mean[ch] += x.values[(s * c + ch) * len + t];
          for (auto& m : mean) m /= count;
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t t = 0; t < len; ++t) {
                const double d = x.values[(s * c + ch) * len + t] - mean[ch];
                var[ch] += d * d;
              }
          for (auto& v : var) v /= count;
          if (stats) {
            // A refresh stores the population statistics so eval mode
            // reproduces the train-mode output on the same batch.
            const bool refresh = mode == Mode::RefreshStats;
            const double unbias = !refresh && count > 1 ? count / (count - 1) : 1.0;
            const double m = refresh ? 1.0 : l.momentum;
            for (std::size_t ch = 0; ch < c; ++ch) {
              stats[ch] = (1 - m) * stats[ch] + m * mean[ch];
              stats[c + ch] = (1 - m) * stats[c + ch] + m * var[ch] * unbias;
            }
          }
        } else if (stats) {
          std::copy(stats, stats + c, mean.begin());
          std::copy(stats + c, stats + 2 * c, var.begin());
        } else {
          std::fill(var.begin(), var.end(), 1.0);
        }
        std::vector<double> inv_std(c);
        for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + l.epsilon);
        std::vector<double>* aux = nullptr;
        if (tape) {
          aux = &tape->aux[i];
          aux->assign(c + x.size(), 0.0);
          std::copy(inv_std.begin(), inv_std.end(), aux->begin());
        }
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t k = (s * c + ch) * len + t;
              const double xhat = (x.values[k] - mean[ch]) * inv_std[ch];
              if (aux) (*aux)[c + k] = xhat;
              y.values[k] = gamma[ch] * xhat + beta[ch];
            }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t k = 0; k < x.size(); ++k) y.values[k] = x.values[k] > 0 ? x.values[k] : 0.0;
        break;
      case LayerKind::Sigmoid:
        for (std::size_t k = 0; k < x.size(); ++k) y.values[k] = 1.0 / (1.0 + std::exp(-x.values[k]));
        if (tape) tape->aux[i] = y.values;
        break;
      case LayerKind::Upsample1d: {
        const std::size_t c = shapes_[i][0], len = shapes_[i][1];
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len * l.factor; ++t)
              y.values[(s * c + ch) * len * l.factor + t] = x.values[(s * c + ch) * len + t / l.factor];
        break;
      }
      case LayerKind::Crop1d: {
        const std::size_t c = shapes_[i][0], len = shapes_[i][1];
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            std::copy_n(x.values.begin() + static_cast<std::ptrdiff_t>((s * c + ch) * len), l.length,
                        y.values.begin() + static_cast<std::ptrdiff_t>((s * c + ch) * l.length));
        break;
      }
      case LayerKind::Reshape:
        y.values = x.values;
        break;
    }
    check_finite(y, i, l);
    if (tape) tape->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  if (tape) tape->output = x;
  return x;
}

Tensor Network::backward(std::span<const double> params, const Tape& tape, const Tensor& d_output,
                         std::span<double> grad) const {
  if (grad.size() != parameter_count_) throw ConfigError("gradient buffer length mismatch");
  if (tape.inputs.size() != spec_.layers.size()) throw ConfigError("tape does not match network");
  if (d_output.shape != tape.output.shape) {
    throw ConfigError("output gradient shape " + shape_to_string(d_output.shape) +
                      " does not match output " + shape_to_string(tape.output.shape));
  }
  Tensor dy = d_output;
  for (std::size_t ii = spec_.layers.size(); ii-- > 0;) {
    const LayerSpec& l = spec_.layers[ii];
    const Tensor& x = tape.inputs[ii];
    const std::size_t n = x.batch();
    const double* p = params.data() + param_offsets_[ii];
    double* g = grad.data() + param_offsets_[ii];
    Tensor dx(x.shape);

    switch (l.kind) {
      case LayerKind::Dense: {
        const auto in = static_cast<Eigen::Index>(l.inputSize);
        const auto out = static_cast<Eigen::Index>(l.outputSize);
        const auto rows = static_cast<Eigen::Index>(n);
        ConstRowMap xin(x.values.data(), rows, in);
        ConstRowMap w(p, out, in);
        ConstRowMap dyo(dy.values.data(), rows, out);
        RowMap gw(g, out, in);
        VecMap gb(g + l.inputSize * l.outputSize, out);
        gw.noalias() += dyo.transpose() * xin;
        gb += dyo.colwise().sum().transpose();
        RowMap dxin(dx.values.data(), rows, in);
        dxin.noalias() = dyo * w;
        break;
      }
      case LayerKind::Conv1d: {
        const std::size_t len_in = shapes_[ii][1];
        const std::size_t len_out = shapes_[ii + 1][1];
        const ColMat col = im2col(x, l, len_in, len_out);
        ColMat dyo(static_cast<Eigen::Index>(l.channelsOut), static_cast<Eigen::Index>(n * len_out));
        double* gb = g + l.channelsOut * l.channelsIn * l.kernelWidth;
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t co = 0; co < l.channelsOut; ++co) {
            const double* src = dy.values.data() + (s * l.channelsOut + co) * len_out;
            for (std::size_t t = 0; t < len_out; ++t) {
              dyo(static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(s * len_out + t)) = src[t];
              gb[co] += src[t];
            }
          }
        const auto kdim = static_cast<Eigen::Index>(l.channelsIn * l.kernelWidth);
        ConstRowMap w(p, static_cast<Eigen::Index>(l.channelsOut), kdim);
        RowMap gw(g, static_cast<Eigen::Index>(l.channelsOut), kdim);
        gw.noalias() += dyo * col.transpose();
        const ColMat dcol = w.transpose() * dyo;
        for (std::size_t s = 0; s < n; ++s) {
          double* dxs = dx.values.data() + s * l.channelsIn * len_in;
          for (std::size_t t = 0; t < len_out; ++t) {
            const auto c = static_cast<Eigen::Index>(s * len_out + t);
            const long start = static_cast<long>(t * l.stride) - static_cast<long>(l.padding);
            for (std::size_t ci = 0; ci < l.channelsIn; ++ci)
              for (std::size_t k = 0; k < l.kernelWidth; ++k) {
                const long pos = start + static_cast<long>(k);
                if (pos >= 0 && pos < static_cast<long>(len_in)) {
                  dxs[ci * len_in + static_cast<std::size_t>(pos)] +=
                      dcol(static_cast<Eigen::Index>(ci * l.kernelWidth + k), c);
                }
              }
          }
        }
        break;
      }
      case LayerKind::BatchNorm1d: {
        const auto [c, len] = channels_and_length(shapes_[ii]);
        const std::vector<double>& aux = tape.aux[ii];
        if (aux.size() != c + x.size()) throw ConfigError("batch norm tape missing");
        const double* inv_std = aux.data();
        const double* xhat = aux.data() + c;
        const double* gamma = p;
        const double count = static_cast<double>(n * len);
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t k = (s * c + ch) * len + t;
              sum_dy[ch] += dy.values[k];
              sum_dy_xhat[ch] += dy.values[k] * xhat[k];
            }
        for (std::size_t ch = 0; ch < c; ++ch) {
          g[ch] += sum_dy_xhat[ch];
          g[c + ch] += sum_dy[ch];
        }
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t k = (s * c + ch) * len + t;
              dx.values[k] = gamma[ch] * inv_std[ch] / count *
                             (count * dy.values[k] - sum_dy[ch] - xhat[k] * sum_dy_xhat[ch]);
            }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t k = 0; k < x.size(); ++k) dx.values[k] = x.values[k] > 0 ? dy.values[k] : 0.0;
        break;
      case LayerKind::Sigmoid: {
        const std::vector<double>& out = tape.aux[ii];
        for (std::size_t k = 0; k < x.size(); ++k) dx.values[k] = dy.values[k] * out[k] * (1.0 - out[k]);
        break;
      }
      case LayerKind::Upsample1d: {
        const std::size_t c = shapes_[ii][0], len = shapes_[ii][1];
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < len * l.factor; ++t)
              dx.values[(s * c + ch) * len + t / l.factor] += dy.values[(s * c + ch) * len * l.factor + t];
        break;
      }
      case LayerKind::Crop1d: {
        const std::size_t c = shapes_[ii][0], len = shapes_[ii][1];
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t ch = 0; ch < c; ++ch)
            std::copy_n(dy.values.begin() + static_cast<std::ptrdiff_t>((s * c + ch) * l.length), l.length,
                        dx.values.begin() + static_cast<std::ptrdiff_t>((s * c + ch) * len));
        break;
      }
      case LayerKind::Reshape:
        dx.values = dy.values;
        break;
    }
    dy = std::move(dx);
  }
  return dy;
}

}  // namespace cropemu::nn
