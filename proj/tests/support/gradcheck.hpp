#pragma once

// Finite-difference oracle for network gradients plus a generator of small
// random networks covering every layer kind and loss. Shared by the unit and
// acceptance suites; independent of the backward pass it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cropemu/nn/loss.hpp"
#include "cropemu/nn/network.hpp"
#include "cropemu/random.hpp"

namespace cropemu::testing {

struct GradCase {
  nn::Network net;
  std::vector<double> params;
  nn::Tensor batch;
  nn::Tensor targets;
  nn::LossKind loss = nn::LossKind::Mse;
  std::vector<std::uint8_t> mask;
};

inline double loss_only(const GradCase& c, const std::vector<double>& params) {
  const nn::Tensor out = c.net.forward(params, c.batch, nn::Mode::Train);
  return nn::compute_loss(c.loss, out, c.targets, c.mask).value;
}

inline std::vector<double> central_differences(const GradCase& c, double h = 1e-5) {
  std::vector<double> g(c.params.size());
  std::vector<double> p = c.params;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = loss_only(c, p);
    p[i] = orig - h;
    const double down = loss_only(c, p);
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-6)
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline nn::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.values) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

// Builds the index-th random case. Three topologies rotate so that all
// layer kinds and all three losses appear within any run of 3 cases;
// every network has at most 64 parameters.
inline GradCase random_grad_case(std::size_t index, std::uint64_t seed) {
  using nn::LayerSpec;
  Rng rng(derive_seed(seed, index));
  GradCase c;
  const std::size_t batch = 4 + uniform_index(rng, 3);
  nn::NetworkSpec spec;
  std::vector<std::size_t> sample;
  switch (index % 3) {
    case 0: {  // dense / batch norm / relu / sigmoid with bce
      const std::size_t in = 2 + uniform_index(rng, 2);
      const std::size_t hidden = 3 + uniform_index(rng, 2);
      const std::size_t out = 1 + uniform_index(rng, 2);
      spec.layers = {LayerSpec::dense(in, hidden), LayerSpec::batchnorm1d(hidden), LayerSpec::relu(),
                     LayerSpec::dense(hidden, out), LayerSpec::sigmoid()};
      sample = {in};
      c.loss = nn::LossKind::Bce;
      c.batch = random_tensor({batch, in}, rng, -1.5, 1.5);
      c.targets = nn::Tensor({batch, out});
      for (double& t : c.targets.values) t = uniform01(rng) < 0.5 ? 0.0 : 1.0;
      break;
    }
    case 1: {  // conv / batch norm over channels / upsample / crop / dense with mse
      const std::size_t len = 5 + uniform_index(rng, 3);
      const std::size_t stride = 1 + uniform_index(rng, 2);
      spec.layers = {LayerSpec::conv1d(1, 2, 3, stride, 1), LayerSpec::batchnorm1d(2), LayerSpec::relu()};
      nn::Network probe(spec, {1, len});
      const std::size_t conv_len = probe.output_shape()[1];
      const std::size_t crop = 2 * conv_len - 1;
      spec.layers.push_back(LayerSpec::upsample1d(2));
      spec.layers.push_back(LayerSpec::crop1d(crop));
      spec.layers.push_back(LayerSpec::dense(2 * crop, 1));
      sample = {1, len};
      c.loss = nn::LossKind::Mse;
      c.batch = random_tensor({batch, 1, len}, rng, -2.0, 2.0);
      c.targets = random_tensor({batch, 1}, rng, -1.0, 1.0);
      break;
    }
    default: {  // dense -> reshape -> conv -> sigmoid with masked mse
      const std::size_t in = 2 + uniform_index(rng, 2);
      const std::size_t len = 4;
      spec.layers = {LayerSpec::dense(in, 2 * len), LayerSpec::reshape(2, len),
                     LayerSpec::conv1d(2, 1, 3, 1, 1), LayerSpec::sigmoid(), LayerSpec::crop1d(3)};
      sample = {in};
      c.loss = nn::LossKind::MaskedMse;
      c.batch = random_tensor({batch, in}, rng, -1.0, 1.0);
      c.targets = random_tensor({batch, 1, 3}, rng, 0.0, 1.0);
      c.mask.resize(c.targets.size());
      for (auto& m : c.mask) m = uniform01(rng) < 0.7 ? 1 : 0;
      c.mask[0] = 1;
      break;
    }
  }
  c.net = nn::Network(spec, sample);
  c.params = c.net.initial_parameters(derive_seed(seed, 1000 + index));
  // Perturb batch-norm affine terms and biases away from their defaults.
  for (double& p : c.params) p += 0.3 * (uniform01(rng) - 0.5);
  return c;
}

}  // namespace cropemu::testing
