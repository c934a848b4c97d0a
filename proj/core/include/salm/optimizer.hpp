#pragma once

#include <cstdint>
#include <optional>

#include "salm/model.hpp"

namespace salm {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global L2 norm bound applied to the gradient before the update.
  std::optional<double> grad_clip_norm = 1.0;

  void validate() const;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct OptimizerState {
  Parameters first_moment;
  Parameters second_moment;
  std::uint64_t step = 0;

  static OptimizerState zeros(const ModelConfig& config);

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

double global_norm(const Parameters& grads);

/// One bias-corrected update of a single tensor. The gradient is multiplied
/// by `grad_scale` (the clipping factor) before it enters the moments.
/// `step` is the 1-based step number after increment.
void adam_update(Matrix& param, const Matrix& grad, Matrix& first, Matrix& second,
                 std::uint64_t step, const AdamConfig& config, double grad_scale = 1.0);

struct StepReport {
  double grad_norm = 0.0;
  bool clipped = false;
};

/// Clips, then updates every tensor in place and increments `state.step`.
/// Throws TrainingError naming the first tensor holding a non-finite
/// gradient; nothing is modified in that case.
StepReport adam_step(Parameters& params, const Parameters& grads, OptimizerState& state,
                     const AdamConfig& config);

}  // namespace salm
