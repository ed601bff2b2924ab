#include "hover/nn/layers.hpp"

#include <cmath>

#include <Eigen/QR>

namespace hover::nn {

Vector sigmoid(const Vector& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

namespace {

Matrix orthogonal(int rows, int cols, Rng& rng, double gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Matrix a(big, small);
  for (int j = 0; j < small; ++j) {
    for (int i = 0; i < big; ++i) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(big, small);
  const Matrix r = qr.matrixQR().topLeftCorner(small, small);
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Matrix w = rows >= cols ? q : Matrix(q.transpose());
  return gain * w;
}

}  // namespace

Dense::Dense(int in, int out, ParameterLayout& layout)
    : in_(in), out_(out), offset_(layout.allocate(static_cast<std::size_t>(out) * (in + 1))) {}

ConstMatrixMap Dense::weight(const Vector& p) const {
  return {p.data() + offset_, out_, in_};
}
ConstVectorMap Dense::bias(const Vector& p) const {
  return {p.data() + offset_ + static_cast<std::size_t>(out_) * in_, out_};
}
MatrixMap Dense::weight(Vector& p) const { return {p.data() + offset_, out_, in_}; }
VectorMap Dense::bias(Vector& p) const {
  return {p.data() + offset_ + static_cast<std::size_t>(out_) * in_, out_};
}

Vector Dense::forward(const Vector& p, const Vector& x) const {
  return weight(p) * x + bias(p);
}

Vector Dense::backward(const Vector& p, const Vector& x, const Vector& dy, Vector& grad) const {
  weight(grad).noalias() += dy * x.transpose();
  bias(grad) += dy;
  return weight(p).transpose() * dy;
}

void Dense::initialize(Vector& p, Rng& rng, double gain) const {
  weight(p) = orthogonal(out_, in_, rng, gain);
  bias(p).setZero();
}

Conv2D::Conv2D(int in_channels, int out_channels, int kernel, int stride, int in_height,
               int in_width, ParameterLayout& layout)
    : in_ch_(in_channels),
      out_ch_(out_channels),
      kernel_(kernel),
      stride_(stride),
      in_h_(in_height),
      in_w_(in_width) {
  require(kernel > 0 && stride > 0 && kernel <= in_height && kernel <= in_width,
          "conv kernel must fit inside the input");
  offset_ = layout.allocate(parameter_count());
}

Vector Conv2D::forward(const Vector& p, const Vector& x) const {
  const int oh = out_height();
  const int ow = out_width();
  Vector y(out_size());
  for (int o = 0; o < out_ch_; ++o) {
    const double b = p[bias_index(o)];
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        double acc = b;
        for (int ch = 0; ch < in_ch_; ++ch) {
          for (int ki = 0; ki < kernel_; ++ki) {
            const int row = r * stride_ + ki;
            for (int kj = 0; kj < kernel_; ++kj) {
              const int col = c * stride_ + kj;
              acc += p[weight_index(o, ch, ki, kj)] * x[(ch * in_h_ + row) * in_w_ + col];
            }
          }
        }
        y[(o * oh + r) * ow + c] = acc;
      }
    }
  }
  return y;
}

Vector Conv2D::backward(const Vector& p, const Vector& x, const Vector& dy, Vector& grad) const {
  const int oh = out_height();
  const int ow = out_width();
  Vector dx = Vector::Zero(in_size());
  for (int o = 0; o < out_ch_; ++o) {
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        const double g = dy[(o * oh + r) * ow + c];
        if (g == 0.0) continue;
        grad[bias_index(o)] += g;
        for (int ch = 0; ch < in_ch_; ++ch) {
          for (int ki = 0; ki < kernel_; ++ki) {
            const int row = r * stride_ + ki;
            for (int kj = 0; kj < kernel_; ++kj) {
              const int col = c * stride_ + kj;
              const std::size_t xi = (ch * in_h_ + row) * in_w_ + col;
              const std::size_t wi = weight_index(o, ch, ki, kj);
              grad[wi] += g * x[xi];
              dx[xi] += g * p[wi];
            }
          }
        }
      }
    }
  }
  return dx;
}

void Conv2D::initialize(Vector& p, Rng& rng) const {
  const double fan_in = static_cast<double>(in_ch_ * kernel_ * kernel_);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
  for (int o = 0; o < out_ch_; ++o) {
    for (int ch = 0; ch < in_ch_; ++ch) {
      for (int ki = 0; ki < kernel_; ++ki) {
        for (int kj = 0; kj < kernel_; ++kj) p[weight_index(o, ch, ki, kj)] = normal(rng);
      }
    }
    p[bias_index(o)] = 0.0;
  }
}

GruCell::GruCell(int in, int hidden, ParameterLayout& layout)
    : in_(in), hidden_(hidden) {
  const auto square = static_cast<std::size_t>(hidden) * hidden;
  wz_ = Dense(in, hidden, layout);
  uz_ = layout.allocate(square);
  wr_ = Dense(in, hidden, layout);
  ur_ = layout.allocate(square);
  wc_ = Dense(in, hidden, layout);
  uc_ = layout.allocate(square);
}

ConstMatrixMap GruCell::recurrent(const Vector& p, std::size_t off) const {
  return {p.data() + off, hidden_, hidden_};
}
MatrixMap GruCell::recurrent(Vector& p, std::size_t off) const {
  return {p.data() + off, hidden_, hidden_};
}

Vector GruCell::forward(const Vector& p, const Vector& x, const Vector& h, Cache* cache) const {
  const Vector z = sigmoid(wz_.forward(p, x) + recurrent(p, uz_) * h);
  const Vector r = sigmoid(wr_.forward(p, x) + recurrent(p, ur_) * h);
  const Vector rh = r.cwiseProduct(h);
  const Vector c = (wc_.forward(p, x) + recurrent(p, uc_) * rh).array().tanh().matrix();
  Vector h_next = z.cwiseProduct(h) + (Vector::Ones(hidden_) - z).cwiseProduct(c);
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->z = z;
    cache->r = r;
    cache->c = c;
    cache->rh = rh;
  }
  return h_next;
}

void GruCell::backward(const Vector& p, const Cache& k, const Vector& dh_next, Vector& grad,
                       Vector& dx, Vector& dh_prev) const {
  const Vector ones = Vector::Ones(hidden_);
  const Vector dz = dh_next.cwiseProduct(k.h_prev - k.c);
  const Vector dc = dh_next.cwiseProduct(ones - k.z);
  dh_prev = dh_next.cwiseProduct(k.z);

  const Vector dac = dc.cwiseProduct(ones - k.c.cwiseProduct(k.c));
  dx = wc_.backward(p, k.x, dac, grad);
  recurrent(grad, uc_).noalias() += dac * k.rh.transpose();
  const Vector drh = recurrent(p, uc_).transpose() * dac;
  const Vector dr = drh.cwiseProduct(k.h_prev);
  dh_prev += drh.cwiseProduct(k.r);

  const Vector daz = dz.cwiseProduct(k.z.cwiseProduct(ones - k.z));
  dx += wz_.backward(p, k.x, daz, grad);
  recurrent(grad, uz_).noalias() += daz * k.h_prev.transpose();
  dh_prev += recurrent(p, uz_).transpose() * daz;

  const Vector dar = dr.cwiseProduct(k.r.cwiseProduct(ones - k.r));
  dx += wr_.backward(p, k.x, dar, grad);
  recurrent(grad, ur_).noalias() += dar * k.h_prev.transpose();
  dh_prev += recurrent(p, ur_).transpose() * dar;
}

void GruCell::initialize(Vector& p, Rng& rng) const {
  for (const Dense* d : {&wz_, &wr_, &wc_}) d->initialize(p, rng, 1.0);
  for (std::size_t off : {uz_, ur_, uc_}) recurrent(p, off) = orthogonal(hidden_, hidden_, rng, 1.0);
}

}  // namespace hover::nn
