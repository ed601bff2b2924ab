#include "hover/dynamics.hpp"

#include <cmath>

namespace hover::dynamics {

ThrusterTable default_thruster_table() {
  // {position, direction}; positions in meters from the geometric center.
  const std::array<std::pair<Vec3, Vec3>, kThrusterCount> layout = {{
      {{-1.0, 0.0, 0.4}, Vec3::UnitX()},
      {{-1.0, 0.0, -0.4}, Vec3::UnitX()},
      {{1.0, 0.0, 0.4}, -Vec3::UnitX()},
      {{1.0, 0.0, -0.4}, -Vec3::UnitX()},
      {{-0.4, -1.0, 0.0}, Vec3::UnitY()},
      {{0.4, -1.0, 0.0}, Vec3::UnitY()},
      {{-0.4, 1.0, 0.0}, -Vec3::UnitY()},
      {{0.4, 1.0, 0.0}, -Vec3::UnitY()},
      {{0.0, -0.4, -1.0}, Vec3::UnitZ()},
      {{0.0, 0.4, -1.0}, Vec3::UnitZ()},
      {{0.0, -0.4, 1.0}, -Vec3::UnitZ()},
      {{0.0, 0.4, 1.0}, -Vec3::UnitZ()},
  }};
  ThrusterTable table;
  for (int i = 0; i < kThrusterCount; ++i) {
    table[i].position = layout[i].first;
    table[i].direction = layout[i].second;
  }
  return table;
}

void DynamicsParams::validate() const {
  require(specific_impulse > 0.0, "specific_impulse must be positive");
  require(g_ref > 0.0, "g_ref must be positive");
  require(dry_mass >= 0.0, "dry_mass must be nonnegative");
  require(cube_side > 0.0, "cube_side must be positive");
}

Mat3 inertia_tensor(double mass, double side) {
  const double s2 = side * side;
  return Mat3(Eigen::Vector3d::Constant(mass / 12.0 * (s2 + s2)).asDiagonal());
}

Mat3 inertia_rate(double mass, double mass_rate, double side) {
  return inertia_tensor(mass, side) * (mass_rate / mass);
}

ForceTorque body_force_torque(const Action& action, const ThrusterTable& table, const Vec3& r_com) {
  ForceTorque out;
  for (int i = 0; i < kThrusterCount; ++i) {
    if (action[i] == 0) continue;
    const Thruster& th = table[i];
    const double magnitude = th.max_thrust * th.health;
    const Vec3 f = th.direction * magnitude;
    out.force += f;
    out.torque += (th.position - r_com).cross(f);
    out.thrust_magnitude_sum += std::abs(magnitude) * th.direction.norm();
  }
  return out;
}

Vec3 asteroid_angular_velocity(const geometry::AsteroidModel& model, double t) {
  const double w0 = model.spin_rate;
  const double st = std::sin(model.nutation);
  const double ct = std::cos(model.nutation);
  const double wn = model.sigma * w0 * ct;
  const double angle = wn * t + model.phase;
  return {w0 * st * std::cos(angle), w0 * st * std::sin(angle), w0 * ct};
}

Eigen::Vector4d quaternion_rate(const Quat& q, const Vec3& omega) {
  const double q0 = q.w(), q1 = q.x(), q2 = q.y(), q3 = q.z();
  const double w0 = omega.x(), w1 = omega.y(), w2 = omega.z();
  return 0.5 * Eigen::Vector4d(-q1 * w0 - q2 * w1 - q3 * w2,
                               q0 * w0 - q3 * w1 + q2 * w2,
                               q3 * w0 + q0 * w1 - q1 * w2,
                               -q2 * w0 + q1 * w1 + q0 * w2);
}

Vec3 euler_rotational_rate(const Mat3& inertia, const Mat3& inertia_dot, const Vec3& omega,
                           const Vec3& torque) {
  const Vec3 rhs = -omega.cross(inertia * omega) - inertia_dot * omega + torque;
  return inertia.ldlt().solve(rhs);
}

StateDerivative state_derivative(const SpacecraftState& s, const ForceTorque& applied,
                                 const geometry::AsteroidModel& model, const EnvForces& env,
                                 const DynamicsParams& params) {
  const double r_norm = s.r.norm();
  if (r_norm < 1.0) {
    throw SingularGravityError("spacecraft within 1 m of the asteroid center");
  }
  StateDerivative d;
  d.mass_dot = -applied.thrust_magnitude_sum / (params.specific_impulse * params.g_ref);

  const Vec3 wa = asteroid_angular_velocity(model, s.t);
  const Vec3 force_frame = s.q.toRotationMatrix() * applied.force;
  const Vec3 gravity = env.gm * s.r / (r_norm * r_norm * r_norm);
  d.r_dot = s.v;
  d.v_dot = force_frame / s.mass + env.srp_accel - gravity + 2.0 * s.v.cross(wa) +
            wa.cross(s.r).cross(wa);

  const Mat3 inertia = inertia_tensor(s.mass, params.cube_side);
  const Mat3 inertia_dot = inertia_rate(s.mass, d.mass_dot, params.cube_side);
  d.omega_dot = euler_rotational_rate(inertia, inertia_dot, s.omega, applied.torque + env.torque_env);
  d.q_dot = quaternion_rate(s.q, s.omega);
  return d;
}

StateDerivative state_derivative(const SpacecraftState& s, const Action& action,
                                 const ThrusterTable& table, const geometry::AsteroidModel& model,
                                 const EnvForces& env, const DynamicsParams& params) {
  return state_derivative(s, body_force_torque(action, table, s.r_com), model, env, params);
}

namespace {

SpacecraftState advance(const SpacecraftState& s, const StateDerivative& d, double h) {
  SpacecraftState out = s;
  out.r += h * d.r_dot;
  out.v += h * d.v_dot;
  out.q.coeffs() += h * Eigen::Vector4d(d.q_dot[1], d.q_dot[2], d.q_dot[3], d.q_dot[0]);
  out.omega += h * d.omega_dot;
  out.mass += h * d.mass_dot;
  out.t += h;
  return out;
}

}  // namespace

SpacecraftState rk4_step(const SpacecraftState& s, const ForceTorque& applied, double dt,
                         const geometry::AsteroidModel& model, const EnvForces& env,
                         const DynamicsParams& params, bool renormalize) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step requires dt > 0");
  const auto k1 = state_derivative(s, applied, model, env, params);
  const auto k2 = state_derivative(advance(s, k1, 0.5 * dt), applied, model, env, params);
  const auto k3 = state_derivative(advance(s, k2, 0.5 * dt), applied, model, env, params);
  const auto k4 = state_derivative(advance(s, k3, dt), applied, model, env, params);

  SpacecraftState out = s;
  const double w = dt / 6.0;
  out.r += w * (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot);
  out.v += w * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
  const Eigen::Vector4d dq = w * (k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot);
  out.q.coeffs() += Eigen::Vector4d(dq[1], dq[2], dq[3], dq[0]);
  out.omega += w * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot);
  out.mass += w * (k1.mass_dot + 2.0 * k2.mass_dot + 2.0 * k3.mass_dot + k4.mass_dot);
  out.t = s.t + dt;
  if (renormalize) out.q.normalize();
  return out;
}

SpacecraftState rk4_step(const SpacecraftState& s, const Action& action,
                         const ThrusterTable& table, double dt,
                         const geometry::AsteroidModel& model, const EnvForces& env,
                         const DynamicsParams& params, bool renormalize) {
  return rk4_step(s, body_force_torque(action, table, s.r_com), dt, model, env, params,
                  renormalize);
}

EnvForces env_forces_for(const geometry::AsteroidModel& model) {
  EnvForces env;
  env.srp_accel = model.srp_accel;
  env.gm = model.gm();
  return env;
}

}  // namespace hover::dynamics
