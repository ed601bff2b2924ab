#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "hover/common.hpp"

namespace hover::nn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstVectorMap = Eigen::Map<const Vector>;
using VectorMap = Eigen::Map<Vector>;

/// Hands out contiguous slices of one flat parameter vector.
class ParameterLayout {
 public:
  std::size_t allocate(std::size_t count) {
    const std::size_t offset = size_;
    size_ += count;
    return offset;
  }
  [[nodiscard]] std::size_t size() const { return size_; }

 private:
  std::size_t size_ = 0;
};

/// Fully connected layer y = W x + b. W is out x in, column-major.
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, ParameterLayout& layout);

  [[nodiscard]] int in() const { return in_; }
  [[nodiscard]] int out() const { return out_; }
  [[nodiscard]] std::size_t offset() const { return offset_; }
  [[nodiscard]] std::size_t parameter_count() const {
    return static_cast<std::size_t>(out_) * (in_ + 1);
  }

  [[nodiscard]] ConstMatrixMap weight(const Vector& p) const;
  [[nodiscard]] ConstVectorMap bias(const Vector& p) const;
  [[nodiscard]] MatrixMap weight(Vector& p) const;
  [[nodiscard]] VectorMap bias(Vector& p) const;

  [[nodiscard]] Vector forward(const Vector& p, const Vector& x) const;
  /// Accumulates dW += dy x^T, db += dy into `grad`; returns W^T dy.
  Vector backward(const Vector& p, const Vector& x, const Vector& dy, Vector& grad) const;

  /// Orthogonal weights scaled by `gain`, zero bias.
  void initialize(Vector& p, Rng& rng, double gain) const;

 private:
  int in_ = 0;
  int out_ = 0;
  std::size_t offset_ = 0;
};

/// Valid-padding 2-D convolution over a (channel, row, col) flattened tensor.
class Conv2D {
 public:
  Conv2D() = default;
  Conv2D(int in_channels, int out_channels, int kernel, int stride, int in_height, int in_width,
         ParameterLayout& layout);

  [[nodiscard]] int out_height() const { return (in_h_ - kernel_) / stride_ + 1; }
  [[nodiscard]] int out_width() const { return (in_w_ - kernel_) / stride_ + 1; }
  [[nodiscard]] int in_size() const { return in_ch_ * in_h_ * in_w_; }
  [[nodiscard]] int out_size() const { return out_ch_ * out_height() * out_width(); }
  [[nodiscard]] std::size_t offset() const { return offset_; }
  [[nodiscard]] std::size_t parameter_count() const {
    return static_cast<std::size_t>(out_ch_) * (in_ch_ * kernel_ * kernel_ + 1);
  }

  [[nodiscard]] Vector forward(const Vector& p, const Vector& x) const;
  Vector backward(const Vector& p, const Vector& x, const Vector& dy, Vector& grad) const;

  /// He-normal weights (std sqrt(2 / fan_in)), zero bias.
  void initialize(Vector& p, Rng& rng) const;

 private:
  [[nodiscard]] std::size_t weight_index(int o, int c, int ki, int kj) const {
    return offset_ + ((static_cast<std::size_t>(o) * in_ch_ + c) * kernel_ + ki) * kernel_ + kj;
  }
  [[nodiscard]] std::size_t bias_index(int o) const {
    return offset_ + static_cast<std::size_t>(out_ch_) * in_ch_ * kernel_ * kernel_ + o;
  }

  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, in_h_ = 0, in_w_ = 0;
  std::size_t offset_ = 0;
};

/// Gated recurrent unit:
///   z = sigmoid(Wz x + Uz h + bz),  r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wc x + Uc (r * h) + bc),  h' = z * h + (1 - z) * c
class GruCell {
 public:
  struct Cache {
    Vector x, h_prev, z, r, c, rh;
  };

  GruCell() = default;
  GruCell(int in, int hidden, ParameterLayout& layout);

  [[nodiscard]] int in() const { return in_; }
  [[nodiscard]] int hidden() const { return hidden_; }
  [[nodiscard]] std::size_t offset() const { return wz_.offset(); }
  [[nodiscard]] std::size_t parameter_count() const {
    return 3 * (static_cast<std::size_t>(hidden_) * (in_ + hidden_ + 1));
  }

  // Gate blocks: the input projections carry the biases.
  [[nodiscard]] const Dense& update_input() const { return wz_; }
  [[nodiscard]] const Dense& reset_input() const { return wr_; }
  [[nodiscard]] const Dense& candidate_input() const { return wc_; }

  [[nodiscard]] Vector forward(const Vector& p, const Vector& x, const Vector& h,
                               Cache* cache = nullptr) const;
  /// Given dL/dh', accumulates parameter gradients and returns dL/dx, dL/dh.
  void backward(const Vector& p, const Cache& cache, const Vector& dh_next, Vector& grad,
                Vector& dx, Vector& dh_prev) const;

  void initialize(Vector& p, Rng& rng) const;

 private:
  [[nodiscard]] ConstMatrixMap recurrent(const Vector& p, std::size_t off) const;
  [[nodiscard]] MatrixMap recurrent(Vector& p, std::size_t off) const;

  int in_ = 0;
  int hidden_ = 0;
  Dense wz_, wr_, wc_;
  std::size_t uz_ = 0, ur_ = 0, uc_ = 0;
};

Vector sigmoid(const Vector& x);

}  // namespace hover::nn
