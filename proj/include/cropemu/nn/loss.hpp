#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cropemu/nn/network.hpp"
#include "cropemu/nn/tensor.hpp"

namespace cropemu::nn {

enum class LossKind { Mse, Bce, MaskedMse };

struct LossResult {
  double value = 0.0;
  Tensor gradient;  // d loss / d output, same shape as the output
};

// All losses are means over batch and output elements. Bce expects
// probabilities in (0, 1) and clamps to [1e-12, 1 - 1e-12]. MaskedMse
// averages only the elements whose mask entry is nonzero; an empty mask
// selection yields zero loss and gradient.
LossResult compute_loss(LossKind kind, const Tensor& output, const Tensor& target,
                        std::span<const std::uint8_t> mask = {});

struct GradientResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Forward in train mode, loss, and backpropagation in one call.
GradientResult network_gradients(const Network& net, std::span<const double> params,
                                 const Tensor& batch, const Tensor& targets, LossKind loss,
                                 std::span<const std::uint8_t> mask = {},
                                 std::span<double> running_stats = {});

inline Tensor network_forward(const Network& net, std::span<const double> params,
                              const Tensor& batch, Mode mode,
                              std::span<double> running_stats = {}) {
  return net.forward(params, batch, mode, running_stats);
}

}  // namespace cropemu::nn
