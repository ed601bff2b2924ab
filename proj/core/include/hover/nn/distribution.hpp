#pragma once

#include "hover/common.hpp"
#include "hover/dynamics.hpp"
#include "hover/nn/layers.hpp"

namespace hover::nn {

// Multi-categorical policy head: one independent 2-way softmax per thruster.
// logits[2 i] scores action 0 (off) and logits[2 i + 1] action 1 (on).

inline constexpr int kActionLogits = 2 * dynamics::kThrusterCount;

struct ActionSample {
  dynamics::Action action{};
  double log_prob = 0.0;
};

ActionSample sample_multicategorical(const Vector& logits, Rng& rng);

/// Most probable category per thruster; ties resolve to off.
dynamics::Action mode_action(const Vector& logits);

/// Probability that each thruster fires (category 1).
Vector fire_probabilities(const Vector& logits);

double log_prob(const Vector& logits, const dynamics::Action& action);
double entropy(const Vector& logits);

/// d log_prob / d logits.
Vector log_prob_gradient(const Vector& logits, const dynamics::Action& action);
/// d entropy / d logits.
Vector entropy_gradient(const Vector& logits);

/// KL(old || new) summed over thrusters.
double kl_divergence(const Vector& old_logits, const Vector& new_logits);

}  // namespace hover::nn
