#pragma once

#include <cstdint>

#include "hover/nn/layers.hpp"

namespace hover::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::int64_t steps = 0;
};

/// Bias-corrected adaptive-moment optimizer.
class Adam {
 public:
  Adam(std::size_t parameter_count, const AdamConfig& cfg = {});

  /// Gradient descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
  void descend(Vector& params, const Vector& grad);
  /// Gradient ascent on an objective, i.e. descent on its negation.
  void ascend(Vector& params, const Vector& grad) { descend(params, -grad); }

  [[nodiscard]] const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  [[nodiscard]] const AdamState& state() const { return state_; }
  void set_state(AdamState state);

 private:
  AdamConfig cfg_;
  AdamState state_;
};

}  // namespace hover::nn
