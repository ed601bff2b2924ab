#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "hover/common.hpp"
#include "hover/geometry.hpp"

namespace hover::dynamics {

inline constexpr int kThrusterCount = 12;

/// On/off command per thruster, indexed like the thruster table (0-based).
using Action = std::array<std::uint8_t, kThrusterCount>;

inline Action null_action() { return Action{}; }

/// Spacecraft state in the asteroid-centered, asteroid-fixed frame.
/// `q` maps body-frame vectors into that frame (scalar-first in Eigen's w()).
struct SpacecraftState {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 omega = Vec3::Zero();  // body rates, rad/s
  double mass = 480.0;
  Vec3 r_com = Vec3::Zero();  // body frame
  double t = 0.0;
};

struct Thruster {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();
  double max_thrust = 1.0;  // N
  double health = 1.0;      // multiplies max_thrust
};

using ThrusterTable = std::array<Thruster, kThrusterCount>;

/// Body-frame thruster layout: two thrusters per cube face, pushing away from
/// the face they sit on (thrusters 1-2 on the -x face thrust along +x, ...).
ThrusterTable default_thruster_table();

struct EnvForces {
  Vec3 srp_accel = Vec3::Zero();    // m/s^2
  Vec3 torque_env = Vec3::Zero();   // N m, body frame
  double gm = 0.0;                  // m^3/s^2
};

struct DynamicsParams {
  double specific_impulse = 225.0;  // s
  double g_ref = 9.8;               // m/s^2
  double dry_mass = 400.0;          // kg
  double cube_side = 2.0;           // m, h = w = d

  void validate() const;
};

/// Uniform-density cube: J = m/12 diag(h^2+d^2, w^2+d^2, w^2+h^2).
Mat3 inertia_tensor(double mass, double side = 2.0);
/// dJ/dt = (J/m) * mdot; the cube inertia is linear in mass.
Mat3 inertia_rate(double mass, double mass_rate, double side = 2.0);

struct ForceTorque {
  Vec3 force = Vec3::Zero();   // body frame, N
  Vec3 torque = Vec3::Zero();  // body frame, N m
  double thrust_magnitude_sum = 0.0;  // sum_i |F_i|, drives propellant flow
};

ForceTorque body_force_torque(const Action& action, const ThrusterTable& table, const Vec3& r_com);

/// Asteroid angular velocity with nutation and phase.
Vec3 asteroid_angular_velocity(const geometry::AsteroidModel& model, double t);

struct StateDerivative {
  Vec3 r_dot;
  Vec3 v_dot;
  Eigen::Vector4d q_dot;  // (w, x, y, z)
  Vec3 omega_dot;
  double mass_dot;
};

/// Raised when the spacecraft comes within 1 m of the asteroid center.
class SingularGravityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quaternion kinematics q_dot = 1/2 q (x) (0, omega), as (w, x, y, z).
Eigen::Vector4d quaternion_rate(const Quat& q, const Vec3& omega);

/// Body rates from J w_dot = -w x (J w) - J_dot w + L.
Vec3 euler_rotational_rate(const Mat3& inertia, const Mat3& inertia_dot, const Vec3& omega,
                           const Vec3& torque);

StateDerivative state_derivative(const SpacecraftState& s, const ForceTorque& applied,
                                 const geometry::AsteroidModel& model, const EnvForces& env,
                                 const DynamicsParams& params);

StateDerivative state_derivative(const SpacecraftState& s, const Action& action,
                                 const ThrusterTable& table, const geometry::AsteroidModel& model,
                                 const EnvForces& env, const DynamicsParams& params);

/// Classical RK4 with the applied force/torque held over the step. The
/// quaternion is renormalized afterwards unless `renormalize` is false.
SpacecraftState rk4_step(const SpacecraftState& s, const ForceTorque& applied, double dt,
                         const geometry::AsteroidModel& model, const EnvForces& env,
                         const DynamicsParams& params, bool renormalize = true);

SpacecraftState rk4_step(const SpacecraftState& s, const Action& action,
                         const ThrusterTable& table, double dt,
                         const geometry::AsteroidModel& model, const EnvForces& env,
                         const DynamicsParams& params, bool renormalize = true);

/// Environment forces for an asteroid: SRP from the model, point-mass gravity.
EnvForces env_forces_for(const geometry::AsteroidModel& model);

}  // namespace hover::dynamics
