#pragma once

#include <limits>
#include <span>
#include <vector>

namespace cropemu::nn {

enum class OptimizerKind { SgdMomentum, AdaptiveMoment };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdaptiveMoment;
  double learningRate = 1e-3;
  double momentum = 0.0;  // sgd-momentum only
  double weightDecay = 0.0;
  double beta1 = 0.9;     // adaptive-moment only
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const OptimizerConfig& cfg);

struct OptimizerState {
  std::vector<double> velocity;      // sgd velocity / first moment
  std::vector<double> second_moment;
  long steps = 0;
};

// sgd-momentum: v <- mu*v + (g + lambda*w); w <- w - lr*v.
// adaptive-moment: L2-coupled decay (g + lambda*w) fed to the usual first and
// second moment estimates with bias correction.
// Throws NumericError on a non-finite gradient, ConfigError on length mismatch.
void optimizer_step(const OptimizerConfig& cfg, std::span<double> params,
                    std::span<const double> gradients, OptimizerState& state);

// Reduce-on-plateau learning-rate schedule.
struct SchedulerState {
  int patience = 8;
  double reductionFactor = 0.5;
  double minLearningRate = 1e-5;
  double bestLoss = std::numeric_limits<double>::infinity();
  int epochsSinceImprovement = 0;
};

// Records one epoch loss and returns the learning rate for the next epoch.
double scheduler_step(SchedulerState& state, double epoch_loss, double current_lr);

}  // namespace cropemu::nn
