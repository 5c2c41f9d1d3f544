#include "cropemu/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cropemu/error.hpp"

namespace cropemu::nn {

LossResult compute_loss(LossKind kind, const Tensor& output, const Tensor& target,
                        std::span<const std::uint8_t> mask) {
  if (output.shape != target.shape) {
    throw ConfigError("target shape " + shape_to_string(target.shape) +
                      " does not match output " + shape_to_string(output.shape));
  }
  LossResult r;
  r.gradient = Tensor(output.shape);
  const std::size_t m = output.size();
  if (m == 0) return r;

  switch (kind) {
    case LossKind::Mse: {
      for (std::size_t k = 0; k < m; ++k) {
        const double d = output.values[k] - target.values[k];
        r.value += d * d;
        r.gradient.values[k] = 2.0 * d / static_cast<double>(m);
      }
      r.value /= static_cast<double>(m);
      break;
    }
    case LossKind::Bce: {
      constexpr double kClamp = 1e-12;
      for (std::size_t k = 0; k < m; ++k) {
        const double p = std::clamp(output.values[k], kClamp, 1.0 - kClamp);
        const double t = target.values[k];
        r.value -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
        r.gradient.values[k] = (p - t) / (p * (1.0 - p)) / static_cast<double>(m);
      }
      r.value /= static_cast<double>(m);
      break;
    }
    case LossKind::MaskedMse: {
      if (mask.size() != m) throw ConfigError("mask length does not match output");
      std::size_t selected = 0;
      for (std::size_t k = 0; k < m; ++k) selected += mask[k] ? 1 : 0;
      if (selected == 0) return r;
      for (std::size_t k = 0; k < m; ++k) {
        if (!mask[k]) continue;
        const double d = output.values[k] - target.values[k];
        r.value += d * d;
        r.gradient.values[k] = 2.0 * d / static_cast<double>(selected);
      }
      r.value /= static_cast<double>(selected);
      break;
    }
  }
  return r;
}

GradientResult network_gradients(const Network& net, std::span<const double> params,
                                 const Tensor& batch, const Tensor& targets, LossKind loss,
                                 std::span<const std::uint8_t> mask,
                                 std::span<double> running_stats) {
  Tape tape;
  const Tensor out = net.forward(params, batch, Mode::Train, running_stats, &tape);
  LossResult lr = compute_loss(loss, out, targets, mask);
  GradientResult result;
  result.loss = lr.value;
  result.gradient.assign(net.parameter_count(), 0.0);
  net.backward(params, tape, lr.gradient, result.gradient);
  return result;
}

}  // namespace cropemu::nn
