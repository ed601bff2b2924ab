#include "hover/nn/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hover::nn {

namespace {

struct PairLogSoftmax {
  double log_p0;
  double log_p1;
};

PairLogSoftmax log_softmax(double l0, double l1) {
  const double m = std::max(l0, l1);
  const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
  return {l0 - lse, l1 - lse};
}

void check_size(const Vector& logits) {
  if (logits.size() != kActionLogits) {
    throw std::invalid_argument("multi-categorical head expects " + std::to_string(kActionLogits) +
                                " logits, got " + std::to_string(logits.size()));
  }
}

}  // namespace

ActionSample sample_multicategorical(const Vector& logits, Rng& rng) {
  check_size(logits);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ActionSample out;
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto lp = log_softmax(logits[2 * i], logits[2 * i + 1]);
    const bool fire = unit(rng) >= std::exp(lp.log_p0);
    out.action[i] = fire ? 1 : 0;
    out.log_prob += fire ? lp.log_p1 : lp.log_p0;
  }
  return out;
}

dynamics::Action mode_action(const Vector& logits) {
  check_size(logits);
  dynamics::Action a{};
  for (int i = 0; i < dynamics::kThrusterCount; ++i) a[i] = logits[2 * i + 1] > logits[2 * i] ? 1 : 0;
  return a;
}

Vector fire_probabilities(const Vector& logits) {
  check_size(logits);
  Vector p(dynamics::kThrusterCount);
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    p[i] = std::exp(log_softmax(logits[2 * i], logits[2 * i + 1]).log_p1);
  }
  return p;
}

double log_prob(const Vector& logits, const dynamics::Action& action) {
  check_size(logits);
  double total = 0.0;
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto lp = log_softmax(logits[2 * i], logits[2 * i + 1]);
    total += action[i] != 0 ? lp.log_p1 : lp.log_p0;
  }
  return total;
}

double entropy(const Vector& logits) {
  check_size(logits);
  double h = 0.0;
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto lp = log_softmax(logits[2 * i], logits[2 * i + 1]);
    h -= std::exp(lp.log_p0) * lp.log_p0 + std::exp(lp.log_p1) * lp.log_p1;
  }
  return h;
}

Vector log_prob_gradient(const Vector& logits, const dynamics::Action& action) {
  check_size(logits);
  Vector g(kActionLogits);
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto lp = log_softmax(logits[2 * i], logits[2 * i + 1]);
    const int a = action[i] != 0 ? 1 : 0;
    g[2 * i] = (a == 0 ? 1.0 : 0.0) - std::exp(lp.log_p0);
    g[2 * i + 1] = (a == 1 ? 1.0 : 0.0) - std::exp(lp.log_p1);
  }
  return g;
}

Vector entropy_gradient(const Vector& logits) {
  check_size(logits);
  Vector g(kActionLogits);
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto lp = log_softmax(logits[2 * i], logits[2 * i + 1]);
    const double p0 = std::exp(lp.log_p0);
    const double p1 = std::exp(lp.log_p1);
    const double h = -(p0 * lp.log_p0 + p1 * lp.log_p1);
    g[2 * i] = -p0 * (lp.log_p0 + h);
    g[2 * i + 1] = -p1 * (lp.log_p1 + h);
  }
  return g;
}

double kl_divergence(const Vector& old_logits, const Vector& new_logits) {
  check_size(old_logits);
  check_size(new_logits);
  double kl = 0.0;
  for (int i = 0; i < dynamics::kThrusterCount; ++i) {
    const auto o = log_softmax(old_logits[2 * i], old_logits[2 * i + 1]);
    const auto n = log_softmax(new_logits[2 * i], new_logits[2 * i + 1]);
    kl += std::exp(o.log_p0) * (o.log_p0 - n.log_p0) + std::exp(o.log_p1) * (o.log_p1 - n.log_p1);
  }
  return kl;
}

}  // namespace hover::nn
