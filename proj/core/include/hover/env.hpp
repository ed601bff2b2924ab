#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

#include "hover/common.hpp"
#include "hover/dynamics.hpp"
#include "hover/geometry.hpp"
#include "hover/lidar.hpp"

namespace hover::env {

struct InitialConditionRanges {
  Range altitude{100.0, 600.0};                // m above the surface along the LOS
  Range polar{0.0, 90.0 * kDegToRad};          // position theta
  Range azimuth{-kPi, kPi};                    // position phi
  Range velocity{-0.10, 0.10};                 // m/s per component
  Range attitude_error{0.0, 11.0 * kDegToRad};  // boresight-to-LOS angle
  Range omega{-0.020, 0.020};                  // rad/s per component
  Range wet_mass{450.0, 500.0};                // kg
  Range rotation_phase{0.0, 2.0 * kPi};        // asteroid phase phi
};

struct FailureConfig {
  double probability = 0.5;
  double scale = 0.9;  // thrust multiplier of the failed thruster
};

struct RewardConfig {
  double position_weight = -0.02;   // alpha
  double attitude_weight = -0.01;   // beta
  double control_weight = -0.05;    // gamma (control effort)
  double progress_bonus = 0.01;     // eta
  double terminal_bonus = 10.0;     // zeta
  double violation_penalty = -50.0;  // kappa
  double terminal_position = 2.0;   // m
  double terminal_speed = 0.1;      // m/s
  double terminal_rate = 0.025;     // rad/s per component
  double max_rate = 0.10;           // rad/s per component, constraint
};

/// Divisors applied when observations are encoded as network inputs.
struct ObservationScaling {
  double range_error = 100.0;  // m
  double range_delta = 10.0;   // m
  double position = 10.0;      // m, value-function input only
  double velocity = 0.1;       // m/s, value-function input only
};

struct EpisodeConfig {
  double duration = 600.0;       // s
  double control_period = 6.0;   // s
  double integration_step = 2.0;  // s
  InitialConditionRanges initial;
  FailureConfig failure;
  double com_variation = 0.0;  // m, per-axis half-width of the COM draw
  geometry::AsteroidGenConfig asteroid;
  geometry::AsteroidDynamicsRanges asteroid_dynamics;
  lidar::SensorConfig sensor;
  dynamics::DynamicsParams dynamics;
  RewardConfig reward;
  ObservationScaling scaling;
  // When set, every episode uses this shape model instead of a synthetic one.
  std::optional<std::filesystem::path> mesh_path;
  double mesh_scale = 1.0;
  int max_initial_condition_attempts = 32;

  void validate() const;
  [[nodiscard]] int control_steps() const;
  [[nodiscard]] int substeps_per_control() const;
};

struct PolicyObservation {
  lidar::RangeMatrix range_error = lidar::RangeMatrix::Zero();  // current - initiation, m
  lidar::RangeMatrix range_delta = lidar::RangeMatrix::Zero();  // current - previous, m
  Eigen::Vector4d dq{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z), attitude change since initiation
  Vec3 omega = Vec3::Zero();
};

struct ValueObservation {
  Vec3 r_err = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Eigen::Vector4d dq{1.0, 0.0, 0.0, 0.0};
  Vec3 omega = Vec3::Zero();
};

inline constexpr int kPolicyInputSize = 2 * lidar::kGridSize * lidar::kGridSize + 7;
inline constexpr int kValueInputSize = 13;

/// [R_err (64, row-major) | dR (64) | dq (4) | omega (3)], scaled.
Eigen::VectorXd encode_policy_input(const PolicyObservation& obs, const ObservationScaling& s);
/// [r_err (3) | v (3) | dq (4) | omega (3)], scaled.
Eigen::VectorXd encode_value_input(const ValueObservation& obs, const ObservationScaling& s);

PolicyObservation build_policy_observation(const lidar::LidarFrame& frame,
                                           const lidar::LidarFrame& initial,
                                           const lidar::LidarFrame& previous, const Quat& dq,
                                           const Vec3& omega);

/// Attitude change q0^-1 q as (w, x, y, z).
Eigen::Vector4d attitude_delta(const Quat& initial, const Quat& current);
/// Rotation angle of a quaternion delta: 2 acos(|w|), rad.
double attitude_error_angle(const Eigen::Vector4d& dq);

struct RewardTerms {
  double position = 0.0;
  double attitude = 0.0;
  double control = 0.0;
  double progress = 0.0;
  double terminal = 0.0;
  double violation = 0.0;

  [[nodiscard]] double total() const {
    return position + attitude + control + progress + terminal + violation;
  }
};

RewardTerms compute_reward(const RewardConfig& cfg, double position_error, double attitude_error,
                           const dynamics::Action& action, bool terminal_ok, bool violated);

/// Terminal thresholds used for evaluation (strict inequalities).
struct HoverThresholds {
  double position_1 = 2.0;  // m, Good Hover 1
  double position_2 = 5.0;  // m, Good Hover 2
  double speed = 0.10;      // m/s
  double rate = 0.015;      // rad/s per component
};

struct HoverClass {
  bool good_hover_1 = false;
  bool good_hover_2 = false;
};

HoverClass classify_hover(double position_error, double speed, const Vec3& omega,
                          const HoverThresholds& t = {});

struct InitialConditions {
  dynamics::SpacecraftState state;
  dynamics::ThrusterTable thrusters;
  int failed_thruster = -1;
  double range_bias = 0.0;
  double attitude_error = 0.0;  // rad, boresight-to-LOS
  double surface_radius = 0.0;  // m, center-to-surface along the LOS
  double rotation_phase = 0.0;  // rad, asteroid phase at hover initiation
};

class InitialConditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

InitialConditions sample_initial_conditions(Rng& rng, const EpisodeConfig& cfg,
                                            const geometry::AsteroidModel& asteroid,
                                            const lidar::MeshIntersector& target);

struct StepInfo {
  int step = 0;
  double t = 0.0;
  Vec3 position_error = Vec3::Zero();
  double speed = 0.0;
  Vec3 omega = Vec3::Zero();
  double fuel_used = 0.0;
  bool rate_violation = false;
  bool all_miss = false;
  bool fuel_exhausted = false;
  bool time_limit = false;
  bool terminal_ok = false;
  RewardTerms reward_terms;
};

struct ResetResult {
  PolicyObservation policy;
  ValueObservation value;
};

struct StepResult {
  PolicyObservation policy;
  ValueObservation value;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Raised on API misuse such as stepping a finished episode.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One hovering episode at a time. Each reset synthesizes a new asteroid
/// (or reuses the configured shape model) and draws fresh initial conditions.
class Environment {
 public:
  explicit Environment(EpisodeConfig cfg,
                       std::shared_ptr<const geometry::TriMesh> shape_model = nullptr);

  ResetResult reset(std::uint64_t seed);
  StepResult step(const dynamics::Action& action);

  [[nodiscard]] const EpisodeConfig& config() const { return cfg_; }
  [[nodiscard]] const dynamics::SpacecraftState& state() const { return state_; }
  [[nodiscard]] const dynamics::SpacecraftState& initial_state() const { return initial_.state; }
  [[nodiscard]] const InitialConditions& initial_conditions() const { return initial_; }
  [[nodiscard]] const geometry::AsteroidModel& asteroid() const { return asteroid_; }
  [[nodiscard]] const lidar::LidarFrame& initial_frame() const { return initial_frame_; }
  [[nodiscard]] const lidar::LidarFrame& last_frame() const { return last_frame_; }
  [[nodiscard]] int step_count() const { return step_; }
  [[nodiscard]] bool done() const { return done_; }
  [[nodiscard]] bool active() const { return active_; }

 private:
  lidar::LidarFrame measure();
  ValueObservation value_observation() const;

  EpisodeConfig cfg_;
  std::shared_ptr<const geometry::TriMesh> shape_model_;
  geometry::AsteroidModel asteroid_;
  std::unique_ptr<lidar::MeshIntersector> target_;
  dynamics::EnvForces forces_;
  InitialConditions initial_;
  dynamics::SpacecraftState state_;
  lidar::LidarFrame initial_frame_;
  lidar::LidarFrame last_frame_;
  Rng noise_rng_;
  int step_ = 0;
  bool done_ = false;
  bool active_ = false;
};

}  // namespace hover::env
