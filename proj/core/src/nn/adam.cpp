#include "hover/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace hover::nn {

Adam::Adam(std::size_t parameter_count, const AdamConfig& cfg) : cfg_(cfg) {
  const auto n = static_cast<Eigen::Index>(parameter_count);
  state_.first_moment = Vector::Zero(n);
  state_.second_moment = Vector::Zero(n);
}

void Adam::descend(Vector& params, const Vector& grad) {
  if (grad.size() != params.size() || grad.size() != state_.first_moment.size()) {
    throw std::invalid_argument("Adam: parameter/gradient size mismatch");
  }
  ++state_.steps;
  state_.first_moment = cfg_.beta1 * state_.first_moment + (1.0 - cfg_.beta1) * grad;
  state_.second_moment =
      cfg_.beta2 * state_.second_moment + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(state_.steps);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  params.array() -= cfg_.learning_rate * (state_.first_moment.array() / c1) /
                    ((state_.second_moment.array() / c2).sqrt() + cfg_.epsilon);
}

void Adam::set_state(AdamState state) {
  if (state.first_moment.size() != state_.first_moment.size() ||
      state.second_moment.size() != state_.second_moment.size()) {
    throw std::invalid_argument("Adam: state size mismatch");
  }
  state_ = std::move(state);
}

}  // namespace hover::nn
