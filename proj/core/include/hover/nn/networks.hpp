#pragma once

#include <cstdint>
#include <vector>

#include "hover/nn/layers.hpp"

namespace hover::nn {

struct PolicyArchitecture {
  int grid = 8;              // LIDAR rows/cols
  int image_channels = 2;    // R_err, dR
  int aux_inputs = 7;        // dq (4) + omega (3)
  int conv1_filters = 8;
  int conv1_kernel = 3;
  int conv1_stride = 1;
  int conv2_filters = 8;
  int conv2_kernel = 4;
  int conv2_stride = 2;
  int fc1_units = 70;
  int recurrent_units = 154;
  int fc3_units = 120;
  int outputs = 24;          // 12 thrusters x 2 categories

  [[nodiscard]] int input_size() const { return image_channels * grid * grid + aux_inputs; }
};

/// conv(3x3, s1) -> relu -> conv(4x4, s2) -> relu -> flatten ++ (dq, omega)
/// -> dense tanh -> GRU -> dense tanh -> linear logits.
class PolicyNetwork {
 public:
  struct StepCache {
    Vector image, conv1, conv2, fc1_in, fc1, hidden, fc3;
    GruCell::Cache gru;
  };
  struct Trace {
    std::vector<Vector> logits;
    std::vector<StepCache> steps;
  };

  explicit PolicyNetwork(const PolicyArchitecture& arch = {});

  [[nodiscard]] const PolicyArchitecture& architecture() const { return arch_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  [[nodiscard]] const Vector& parameters() const { return params_; }
  [[nodiscard]] Vector& parameters() { return params_; }
  void set_parameters(const Vector& p);
  void initialize(std::uint64_t seed);

  [[nodiscard]] Vector initial_hidden() const { return Vector::Zero(arch_.recurrent_units); }

  /// One inference step; `hidden` is advanced in place. Returns the logits.
  Vector step(const Vector& input, Vector& hidden, StepCache* cache = nullptr) const;

  [[nodiscard]] Trace forward_sequence(const std::vector<Vector>& inputs,
                                       const Vector& initial_hidden) const;
  /// Backpropagation through time; dlogits[t] is dL/dlogits at step t.
  [[nodiscard]] Vector backward_sequence(const Trace& trace, const std::vector<Vector>& dlogits) const;

  [[nodiscard]] const Conv2D& conv1() const { return conv1_; }
  [[nodiscard]] const Conv2D& conv2() const { return conv2_; }
  [[nodiscard]] const Dense& fc1() const { return fc1_; }
  [[nodiscard]] const GruCell& recurrent() const { return gru_; }
  [[nodiscard]] const Dense& fc3() const { return fc3_; }
  [[nodiscard]] const Dense& output() const { return out_; }

 private:
  PolicyArchitecture arch_;
  Conv2D conv1_, conv2_;
  Dense fc1_;
  GruCell gru_;
  Dense fc3_, out_;
  Vector params_;
};

struct ValueArchitecture {
  int inputs = 13;
  int hidden1 = 130;  // 10 * inputs
  int recurrent_units = 25;  // floor(sqrt(hidden1 * hidden3))
  int hidden3 = 5;
};

/// dense tanh -> GRU -> dense tanh -> linear scalar.
class ValueNetwork {
 public:
  struct StepCache {
    Vector input, h1, hidden, h3;
    GruCell::Cache gru;
  };
  struct Trace {
    std::vector<double> values;
    std::vector<StepCache> steps;
  };

  explicit ValueNetwork(const ValueArchitecture& arch = {});

  [[nodiscard]] const ValueArchitecture& architecture() const { return arch_; }
  [[nodiscard]] std::size_t parameter_count() const { return params_.size(); }
  [[nodiscard]] const Vector& parameters() const { return params_; }
  [[nodiscard]] Vector& parameters() { return params_; }
  void set_parameters(const Vector& p);
  void initialize(std::uint64_t seed);

  [[nodiscard]] Vector initial_hidden() const { return Vector::Zero(arch_.recurrent_units); }

  double step(const Vector& input, Vector& hidden, StepCache* cache = nullptr) const;
  [[nodiscard]] Trace forward_sequence(const std::vector<Vector>& inputs,
                                       const Vector& initial_hidden) const;
  [[nodiscard]] Vector backward_sequence(const Trace& trace, const std::vector<double>& dvalues) const;

 private:
  ValueArchitecture arch_;
  Dense fc1_;
  GruCell gru_;
  Dense fc3_, out_;
  Vector params_;
};

}  // namespace hover::nn
