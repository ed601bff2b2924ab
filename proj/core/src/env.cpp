#include "hover/env.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace hover::env {

using dynamics::Action;
using lidar::LidarFrame;

void EpisodeConfig::validate() const {
  require(duration > 0.0, "episode duration must be positive");
  require(control_period > 0.0, "control_period must be positive");
  require(integration_step > 0.0, "integration_step must be positive");
  const double per_control = control_period / integration_step;
  require(std::abs(per_control - std::round(per_control)) < 1e-9,
          "control_period must be a whole multiple of integration_step");
  require(initial.altitude.valid() && initial.altitude.min > 0.0,
          "initial altitude range must satisfy 0 < min <= max");
  require(initial.polar.valid() && initial.azimuth.valid() && initial.velocity.valid() &&
              initial.attitude_error.valid() && initial.omega.valid() &&
              initial.rotation_phase.valid(),
          "initial-condition ranges must satisfy min <= max");
  require(initial.wet_mass.valid() && initial.wet_mass.min > dynamics.dry_mass,
          "wet mass range must lie above the dry mass");
  require(failure.probability >= 0.0 && failure.probability <= 1.0,
          "failure probability must be in [0, 1]");
  require(failure.scale >= 0.0 && failure.scale <= 1.0, "failure scale must be in [0, 1]");
  require(com_variation >= 0.0, "com_variation must be nonnegative");
  require(mesh_scale > 0.0, "mesh_scale must be positive");
  require(max_initial_condition_attempts > 0, "max_initial_condition_attempts must be positive");
  require(scaling.range_error > 0 && scaling.range_delta > 0 && scaling.position > 0 &&
              scaling.velocity > 0,
          "observation scaling divisors must be positive");
  asteroid.validate();
  asteroid_dynamics.validate();
  sensor.validate();
  dynamics.validate();
}

int EpisodeConfig::control_steps() const {
  return static_cast<int>(std::ceil(duration / control_period - 1e-9));
}

int EpisodeConfig::substeps_per_control() const {
  return static_cast<int>(std::lround(control_period / integration_step));
}

Eigen::VectorXd encode_policy_input(const PolicyObservation& obs, const ObservationScaling& s) {
  constexpr int n = lidar::kGridSize * lidar::kGridSize;
  Eigen::VectorXd x(kPolicyInputSize);
  for (int i = 0; i < lidar::kGridSize; ++i) {
    for (int j = 0; j < lidar::kGridSize; ++j) {
      x[i * lidar::kGridSize + j] = obs.range_error(i, j) / s.range_error;
      x[n + i * lidar::kGridSize + j] = obs.range_delta(i, j) / s.range_delta;
    }
  }
  x.segment<4>(2 * n) = obs.dq;
  x.segment<3>(2 * n + 4) = obs.omega;
  return x;
}

Eigen::VectorXd encode_value_input(const ValueObservation& obs, const ObservationScaling& s) {
  Eigen::VectorXd x(kValueInputSize);
  x.segment<3>(0) = obs.r_err / s.position;
  x.segment<3>(3) = obs.v / s.velocity;
  x.segment<4>(6) = obs.dq;
  x.segment<3>(10) = obs.omega;
  return x;
}

Eigen::Vector4d attitude_delta(const Quat& initial, const Quat& current) {
  const Quat d = initial.conjugate() * current;
  return {d.w(), d.x(), d.y(), d.z()};
}

double attitude_error_angle(const Eigen::Vector4d& dq) {
  const double w = std::min(1.0, std::abs(dq[0]) / dq.norm());
  return 2.0 * std::acos(w);
}

PolicyObservation build_policy_observation(const LidarFrame& frame, const LidarFrame& initial,
                                           const LidarFrame& previous, const Quat& dq,
                                           const Vec3& omega) {
  PolicyObservation obs;
  obs.range_error = frame.ranges - initial.ranges;
  obs.range_delta = frame.ranges - previous.ranges;
  obs.dq = {dq.w(), dq.x(), dq.y(), dq.z()};
  obs.omega = omega;
  return obs;
}

RewardTerms compute_reward(const RewardConfig& cfg, double position_error, double attitude_error,
                           const Action& action, bool terminal_ok, bool violated) {
  int firing = 0;
  for (auto bit : action) firing += bit != 0 ? 1 : 0;
  RewardTerms terms;
  terms.position = cfg.position_weight * position_error;
  terms.attitude = cfg.attitude_weight * attitude_error;
  terms.control = cfg.control_weight * static_cast<double>(firing) / dynamics::kThrusterCount;
  terms.progress = cfg.progress_bonus;
  terms.terminal = terminal_ok ? cfg.terminal_bonus : 0.0;
  terms.violation = violated ? cfg.violation_penalty : 0.0;
  return terms;
}

HoverClass classify_hover(double position_error, double speed, const Vec3& omega,
                          const HoverThresholds& t) {
  const bool rates_ok = omega.cwiseAbs().maxCoeff() < t.rate;
  const bool speed_ok = speed < t.speed;
  return {position_error < t.position_1 && speed_ok && rates_ok,
          position_error < t.position_2 && speed_ok && rates_ok};
}

InitialConditions sample_initial_conditions(Rng& rng, const EpisodeConfig& cfg,
                                            const geometry::AsteroidModel& asteroid,
                                            const lidar::MeshIntersector& target) {
  const auto& ic = cfg.initial;
  const double far = 2.0 * asteroid.mesh.bounding_radius() + 10.0;
  const double inf = std::numeric_limits<double>::infinity();

  InitialConditions out;
  bool placed = false;
  for (int attempt = 0; attempt < cfg.max_initial_condition_attempts && !placed; ++attempt) {
    const double polar = draw_uniform(rng, ic.polar);
    const double azimuth = draw_uniform(rng, ic.azimuth);
    const Vec3 dir(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
                   std::cos(polar));
    const double t = target.cast(dir * far, -dir, inf);
    if (!std::isfinite(t)) continue;
    out.surface_radius = far - t;
    out.state.r = dir * (out.surface_radius + draw_uniform(rng, ic.altitude));
    placed = true;
  }
  if (!placed) {
    throw InitialConditionError("line of sight never intersected the asteroid after " +
                                std::to_string(cfg.max_initial_condition_attempts) + " attempts");
  }

  auto& s = out.state;
  for (int k = 0; k < 3; ++k) s.v[k] = draw_uniform(rng, ic.velocity);

  // Body +Z along the outward LOS puts the -Z boresight on the asteroid center;
  // tilting about an axis normal to the boresight sets the pointing error.
  const Vec3 outward = s.r.normalized();
  const Quat ideal = Quat::FromTwoVectors(Vec3::UnitZ(), outward);
  out.attitude_error = draw_uniform(rng, ic.attitude_error);
  const double tilt_azimuth = draw_uniform(rng, {0.0, 2.0 * kPi});
  const Vec3 tilt_axis(std::cos(tilt_azimuth), std::sin(tilt_azimuth), 0.0);
  s.q = (ideal * Quat(Eigen::AngleAxisd(out.attitude_error, tilt_axis))).normalized();

  for (int k = 0; k < 3; ++k) s.omega[k] = draw_uniform(rng, ic.omega);
  s.mass = draw_uniform(rng, ic.wet_mass);
  s.t = 0.0;

  out.thrusters = dynamics::default_thruster_table();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < cfg.failure.probability) {
    std::uniform_int_distribution<int> pick(0, dynamics::kThrusterCount - 1);
    out.failed_thruster = pick(rng);
    out.thrusters[out.failed_thruster].health = cfg.failure.scale;
  }
  if (cfg.com_variation > 0.0) {
    const Range com{-cfg.com_variation, cfg.com_variation};
    for (int k = 0; k < 3; ++k) s.r_com[k] = draw_uniform(rng, com);
  }
  out.range_bias = draw_uniform(rng, cfg.sensor.noise_bias);
  out.rotation_phase = draw_uniform(rng, ic.rotation_phase);
  return out;
}

Environment::Environment(EpisodeConfig cfg, std::shared_ptr<const geometry::TriMesh> shape_model)
    : cfg_(std::move(cfg)), shape_model_(std::move(shape_model)) {
  cfg_.validate();
  if (!shape_model_ && cfg_.mesh_path) {
    shape_model_ = std::make_shared<const geometry::TriMesh>(
        geometry::load_mesh_file(*cfg_.mesh_path, cfg_.mesh_scale));
  }
  if (shape_model_) target_ = std::make_unique<lidar::MeshIntersector>(*shape_model_);
}

ResetResult Environment::reset(std::uint64_t seed) {
  if (shape_model_) {
    asteroid_ = geometry::asteroid_from_mesh(*shape_model_, mix_seed(seed, 0), cfg_.asteroid_dynamics);
  } else {
    asteroid_ = geometry::synthesize_asteroid(mix_seed(seed, 0), cfg_.asteroid, cfg_.asteroid_dynamics);
    target_ = std::make_unique<lidar::MeshIntersector>(asteroid_.mesh);
  }

  Rng ic_rng(mix_seed(seed, 1));
  initial_ = sample_initial_conditions(ic_rng, cfg_, asteroid_, *target_);
  asteroid_.phase = initial_.rotation_phase;
  forces_ = dynamics::env_forces_for(asteroid_);
  noise_rng_.seed(mix_seed(seed, 2));

  state_ = initial_.state;
  step_ = 0;
  done_ = false;
  active_ = true;
  initial_frame_ = measure();
  last_frame_ = initial_frame_;

  ResetResult out;
  out.policy.omega = state_.omega;
  out.value = value_observation();
  return out;
}

LidarFrame Environment::measure() {
  LidarFrame frame = lidar::scan(*target_, state_.r, initial_.state.q, cfg_.sensor);
  const bool noisy = cfg_.sensor.noise_sigma > 0.0 || initial_.range_bias != 0.0;
  if (noisy) {
    frame = lidar::apply_sensor_noise(frame, initial_.range_bias, cfg_.sensor.noise_sigma,
                                      noise_rng_, cfg_.sensor.max_range);
  }
  return frame;
}

ValueObservation Environment::value_observation() const {
  ValueObservation obs;
  obs.r_err = state_.r - initial_.state.r;
  obs.v = state_.v;
  obs.dq = attitude_delta(initial_.state.q, state_.q);
  obs.omega = state_.omega;
  return obs;
}

StepResult Environment::step(const Action& action) {
  if (!active_) throw UsageError("step() called before reset()");
  if (done_) throw UsageError("step() called after the episode finished");

  const int substeps = cfg_.substeps_per_control();
  for (int k = 0; k < substeps; ++k) {
    state_ = dynamics::rk4_step(state_, action, initial_.thrusters, cfg_.integration_step,
                                asteroid_, forces_, cfg_.dynamics);
  }
  ++step_;

  const LidarFrame frame = measure();
  StepResult out;
  StepInfo& info = out.info;
  info.step = step_;
  info.t = state_.t;
  info.position_error = state_.r - initial_.state.r;
  info.speed = state_.v.norm();
  info.omega = state_.omega;
  info.fuel_used = initial_.state.mass - state_.mass;
  info.rate_violation = (state_.omega.cwiseAbs().array() > cfg_.reward.max_rate).any();
  info.all_miss = frame.all_miss();
  info.fuel_exhausted = state_.mass <= cfg_.dynamics.dry_mass;
  info.time_limit = step_ >= cfg_.control_steps();

  const bool violated = info.rate_violation || info.all_miss || info.fuel_exhausted;
  const double pos_err = info.position_error.norm();
  const auto& rc = cfg_.reward;
  info.terminal_ok = info.time_limit && !violated && pos_err <= rc.terminal_position &&
                     info.speed <= rc.terminal_speed &&
                     state_.omega.cwiseAbs().maxCoeff() <= rc.terminal_rate;

  out.value = value_observation();
  info.reward_terms = compute_reward(rc, pos_err, attitude_error_angle(out.value.dq), action,
                                     info.terminal_ok, violated);
  out.reward = info.reward_terms.total();
  out.done = violated || info.time_limit;
  done_ = out.done;

  out.policy = build_policy_observation(frame, initial_frame_, last_frame_,
                                        initial_.state.q.conjugate() * state_.q, state_.omega);
  last_frame_ = frame;
  return out;
}

}  // namespace hover::env
