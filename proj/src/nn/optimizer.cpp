#include "cropemu/nn/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "cropemu/error.hpp"

namespace cropemu::nn {

void validate(const OptimizerConfig& cfg) {
  if (!(cfg.learningRate > 0.0)) throw ConfigError("learningRate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(cfg.weightDecay >= 0.0)) throw ConfigError("weightDecay must be >= 0");
}

void optimizer_step(const OptimizerConfig& cfg, std::span<double> params,
                    std::span<const double> gradients, OptimizerState& state) {
  if (params.size() != gradients.size()) {
    throw ConfigError("parameter and gradient lengths differ");
  }
  for (double g : gradients) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient passed to optimizer");
  }
  const std::size_t n = params.size();
  if (state.velocity.size() != n) state.velocity.assign(n, 0.0);
  ++state.steps;

  if (cfg.kind == OptimizerKind::SgdMomentum) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gradients[i] + cfg.weightDecay * params[i];
      state.velocity[i] = cfg.momentum * state.velocity[i] + g;
      params[i] -= cfg.learningRate * state.velocity[i];
    }
    return;
  }

  if (state.second_moment.size() != n) state.second_moment.assign(n, 0.0);
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradients[i] + cfg.weightDecay * params[i];
    state.velocity[i] = cfg.beta1 * state.velocity[i] + (1.0 - cfg.beta1) * g;
    state.second_moment[i] = cfg.beta2 * state.second_moment[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.velocity[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    params[i] -= cfg.learningRate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

double scheduler_step(SchedulerState& state, double epoch_loss, double current_lr) {
  if (epoch_loss < state.bestLoss) {
    state.bestLoss = epoch_loss;
    state.epochsSinceImprovement = 0;
    return current_lr;
  }
  if (++state.epochsSinceImprovement >= state.patience) {
    state.epochsSinceImprovement = 0;
    return std::max(current_lr * state.reductionFactor, state.minLearningRate);
  }
  return current_lr;
}

}  // namespace cropemu::nn
