#include "hover/nn/networks.hpp"

#include <stdexcept>
#include <string>

namespace hover::nn {

namespace {

Vector relu(const Vector& x) { return x.cwiseMax(0.0); }
Vector tanh_of(const Vector& x) { return x.array().tanh().matrix(); }

// Derivatives expressed through the activation outputs.
Vector relu_backward(const Vector& y, const Vector& dy) {
  return (y.array() > 0.0).select(dy, 0.0);
}
Vector tanh_backward(const Vector& y, const Vector& dy) {
  return dy.cwiseProduct((1.0 - y.array().square()).matrix());
}

void check_input(const Vector& x, int expected, const char* who) {
  if (x.size() != expected) {
    throw std::invalid_argument(std::string(who) + ": expected input of size " +
                                std::to_string(expected) + ", got " + std::to_string(x.size()));
  }
}

}  // namespace

PolicyNetwork::PolicyNetwork(const PolicyArchitecture& arch) : arch_(arch) {
  ParameterLayout layout;
  conv1_ = Conv2D(arch.image_channels, arch.conv1_filters, arch.conv1_kernel, arch.conv1_stride,
                  arch.grid, arch.grid, layout);
  conv2_ = Conv2D(arch.conv1_filters, arch.conv2_filters, arch.conv2_kernel, arch.conv2_stride,
                  conv1_.out_height(), conv1_.out_width(), layout);
  fc1_ = Dense(conv2_.out_size() + arch.aux_inputs, arch.fc1_units, layout);
  gru_ = GruCell(arch.fc1_units, arch.recurrent_units, layout);
  fc3_ = Dense(arch.recurrent_units, arch.fc3_units, layout);
  out_ = Dense(arch.fc3_units, arch.outputs, layout);
  params_ = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
}

void PolicyNetwork::set_parameters(const Vector& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("policy parameter size mismatch");
  params_ = p;
}

void PolicyNetwork::initialize(std::uint64_t seed) {
  Rng rng(seed);
  conv1_.initialize(params_, rng);
  conv2_.initialize(params_, rng);
  fc1_.initialize(params_, rng, 1.0);
  gru_.initialize(params_, rng);
  fc3_.initialize(params_, rng, 1.0);
  // Near-uniform initial action distribution.
  out_.initialize(params_, rng, 0.01);
}

Vector PolicyNetwork::step(const Vector& input, Vector& hidden, StepCache* cache) const {
  check_input(input, arch_.input_size(), "PolicyNetwork");
  if (hidden.size() != arch_.recurrent_units) {
    throw std::invalid_argument("PolicyNetwork: hidden state size mismatch");
  }
  const int image_size = conv1_.in_size();
  const Vector image = input.head(image_size);
  const Vector c1 = relu(conv1_.forward(params_, image));
  const Vector c2 = relu(conv2_.forward(params_, c1));
  Vector fc1_in(c2.size() + arch_.aux_inputs);
  fc1_in << c2, input.tail(arch_.aux_inputs);
  const Vector f1 = tanh_of(fc1_.forward(params_, fc1_in));
  Vector h = gru_.forward(params_, f1, hidden, cache ? &cache->gru : nullptr);
  const Vector f3 = tanh_of(fc3_.forward(params_, h));
  Vector logits = out_.forward(params_, f3);
  if (cache) {
    cache->image = image;
    cache->conv1 = c1;
    cache->conv2 = c2;
    cache->fc1_in = fc1_in;
    cache->fc1 = f1;
    cache->hidden = h;
    cache->fc3 = f3;
  }
  hidden = std::move(h);
  return logits;
}

PolicyNetwork::Trace PolicyNetwork::forward_sequence(const std::vector<Vector>& inputs,
                                                     const Vector& initial_hidden) const {
  Trace trace;
  trace.logits.reserve(inputs.size());
  trace.steps.resize(inputs.size());
  Vector h = initial_hidden;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    trace.logits.push_back(step(inputs[t], h, &trace.steps[t]));
  }
  return trace;
}

Vector PolicyNetwork::backward_sequence(const Trace& trace,
                                        const std::vector<Vector>& dlogits) const {
  if (dlogits.size() != trace.steps.size()) {
    throw std::invalid_argument("PolicyNetwork: gradient sequence length mismatch");
  }
  Vector grad = Vector::Zero(params_.size());
  Vector dh = Vector::Zero(arch_.recurrent_units);
  const int conv_out = conv2_.out_size();
  for (std::size_t idx = trace.steps.size(); idx-- > 0;) {
    const StepCache& k = trace.steps[idx];
    const Vector df3 = out_.backward(params_, k.fc3, dlogits[idx], grad);
    dh += fc3_.backward(params_, k.hidden, tanh_backward(k.fc3, df3), grad);
    Vector dx;
    Vector dh_prev;
    gru_.backward(params_, k.gru, dh, grad, dx, dh_prev);
    dh = std::move(dh_prev);
    const Vector dfc1_in = fc1_.backward(params_, k.fc1_in, tanh_backward(k.fc1, dx), grad);
    const Vector dc2 = relu_backward(k.conv2, dfc1_in.head(conv_out));
    const Vector dc1 = conv2_.backward(params_, k.conv1, dc2, grad);
    conv1_.backward(params_, k.image, relu_backward(k.conv1, dc1), grad);
  }
  return grad;
}

ValueNetwork::ValueNetwork(const ValueArchitecture& arch) : arch_(arch) {
  ParameterLayout layout;
  fc1_ = Dense(arch.inputs, arch.hidden1, layout);
  gru_ = GruCell(arch.hidden1, arch.recurrent_units, layout);
  fc3_ = Dense(arch.recurrent_units, arch.hidden3, layout);
  out_ = Dense(arch.hidden3, 1, layout);
  params_ = Vector::Zero(static_cast<Eigen::Index>(layout.size()));
}

void ValueNetwork::set_parameters(const Vector& p) {
  if (p.size() != params_.size()) throw std::invalid_argument("value parameter size mismatch");
  params_ = p;
}

void ValueNetwork::initialize(std::uint64_t seed) {
  Rng rng(seed);
  fc1_.initialize(params_, rng, 1.0);
  gru_.initialize(params_, rng);
  fc3_.initialize(params_, rng, 1.0);
  out_.initialize(params_, rng, 1.0);
}

double ValueNetwork::step(const Vector& input, Vector& hidden, StepCache* cache) const {
  check_input(input, arch_.inputs, "ValueNetwork");
  if (hidden.size() != arch_.recurrent_units) {
    throw std::invalid_argument("ValueNetwork: hidden state size mismatch");
  }
  const Vector h1 = tanh_of(fc1_.forward(params_, input));
  Vector h = gru_.forward(params_, h1, hidden, cache ? &cache->gru : nullptr);
  const Vector h3 = tanh_of(fc3_.forward(params_, h));
  const double value = out_.forward(params_, h3)[0];
  if (cache) {
    cache->input = input;
    cache->h1 = h1;
    cache->hidden = h;
    cache->h3 = h3;
  }
  hidden = std::move(h);
  return value;
}

ValueNetwork::Trace ValueNetwork::forward_sequence(const std::vector<Vector>& inputs,
                                                   const Vector& initial_hidden) const {
  Trace trace;
  trace.values.reserve(inputs.size());
  trace.steps.resize(inputs.size());
  Vector h = initial_hidden;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    trace.values.push_back(step(inputs[t], h, &trace.steps[t]));
  }
  return trace;
}

Vector ValueNetwork::backward_sequence(const Trace& trace, const std::vector<double>& dvalues) const {
  if (dvalues.size() != trace.steps.size()) {
    throw std::invalid_argument("ValueNetwork: gradient sequence length mismatch");
  }
  Vector grad = Vector::Zero(params_.size());
  Vector dh = Vector::Zero(arch_.recurrent_units);
  for (std::size_t idx = trace.steps.size(); idx-- > 0;) {
    const StepCache& k = trace.steps[idx];
    const Vector dh3 = out_.backward(params_, k.h3, Vector::Constant(1, dvalues[idx]), grad);
    dh += fc3_.backward(params_, k.hidden, tanh_backward(k.h3, dh3), grad);
    Vector dx;
    Vector dh_prev;
    gru_.backward(params_, k.gru, dh, grad, dx, dh_prev);
    dh = std::move(dh_prev);
    fc1_.backward(params_, k.input, tanh_backward(k.h1, dx), grad);
  }
  return grad;
}

}  // namespace hover::nn
