#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cropemu/nn/tensor.hpp"

namespace cropemu::nn {

enum class LayerKind {
  Dense,
  Conv1d,
  BatchNorm1d,
  Relu,
  Sigmoid,
  // Shape plumbing used by the convolutional decoders.
  Upsample1d,
  Crop1d,
  Reshape,
};

const char* to_string(LayerKind kind);

// One layer of a sequential network. Only the fields relevant to `kind` are
// read; the named constructors fill them consistently.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  // dense
  std::size_t inputSize = 0;
  std::size_t outputSize = 0;
  // conv1d
  std::size_t channelsIn = 0;
  std::size_t channelsOut = 0;
  std::size_t kernelWidth = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // batchnorm1d
  std::size_t featureCount = 0;
  double momentum = 0.1;
  double epsilon = 1e-5;
  // upsample1d (factor), crop1d (length), reshape (channels x length)
  std::size_t factor = 1;
  std::size_t channels = 0;
  std::size_t length = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t cin, std::size_t cout, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec batchnorm1d(std::size_t features, double momentum = 0.1,
                               double epsilon = 1e-5);
  static LayerSpec relu();
  static LayerSpec sigmoid();
  static LayerSpec upsample1d(std::size_t factor);
  static LayerSpec crop1d(std::size_t length);
  static LayerSpec reshape(std::size_t channels, std::size_t length);

  std::size_t parameter_count() const;
  // Running mean + running variance slots (batch norm only).
  std::size_t running_stat_count() const;

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  std::size_t parameter_count() const;
  bool operator==(const NetworkSpec&) const = default;
};

enum class Mode {
  Train,
  Eval,
  // Train-mode forward that overwrites running statistics with the exact
  // population statistics of the batch (used to refresh batch norm for new
  // weights).
  RefreshStats,
};

// Activations cached by a forward pass for the backward pass.
struct Tape {
  std::vector<Tensor> inputs;              // input of every layer
  std::vector<std::vector<double>> aux;    // per-layer scratch (batch norm)
  Tensor output;
};

// A validated sequential network: a NetworkSpec bound to a per-sample input
// shape, with parameter and running-statistic offsets resolved. Immutable
// after construction; parameters and running statistics live outside so one
// Network can evaluate many weight vectors concurrently.
class Network {
 public:
  Network() = default;
  // sample_shape excludes the batch dimension, e.g. {features} or
  // {channels, length}. Throws ConfigError when adjacent layers do not
  // compose.
  Network(NetworkSpec spec, std::vector<std::size_t> sample_shape);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  const std::vector<std::size_t>& output_shape() const { return shapes_.back(); }
  std::size_t parameter_count() const { return parameter_count_; }
  std::size_t running_stat_count() const { return stat_count_; }
  bool has_batchnorm() const { return stat_count_ > 0; }
  std::size_t parameter_offset(std::size_t layer) const { return param_offsets_[layer]; }

  // Fan-in/fan-out uniform weights, zero biases, unit batch-norm scale.
  std::vector<double> initial_parameters(std::uint64_t seed) const;
  // Running means 0, running variances 1.
  std::vector<double> initial_running_stats() const;

  // running_stats may be empty, in which case Train mode leaves no trace and
  // Eval mode uses mean 0 / variance 1.
  Tensor forward(std::span<const double> params, const Tensor& batch, Mode mode,
                 std::span<double> running_stats = {}, Tape* tape = nullptr) const;

  // Accumulates parameter gradients into grad (+=) and returns the gradient
  // with respect to the network input.
  Tensor backward(std::span<const double> params, const Tape& tape, const Tensor& d_output,
                  std::span<double> grad) const;

 private:
  void check_batch(const Tensor& batch) const;

  NetworkSpec spec_;
  std::vector<std::size_t> input_shape_;
  std::vector<std::vector<std::size_t>> shapes_;  // shapes_[i] = input of layer i
  std::vector<std::size_t> param_offsets_;
  std::vector<std::size_t> stat_offsets_;
  std::size_t parameter_count_ = 0;
  std::size_t stat_count_ = 0;
};

}  // namespace cropemu::nn
