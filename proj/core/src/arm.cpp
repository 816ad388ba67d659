#include "tgrasp/arm.hpp"

#include <cmath>
#include <string>

namespace tgrasp {

void ArmModel::validate() const {
  for (double m : inertia)
    if (!(m > 0)) throw ValidationError("arm: inertia must be > 0 per joint");
  for (double b : damping)
    if (b < 0) throw ValidationError("arm: damping must be >= 0 per joint");
  if (!(q3_min > 0) || !(q3_max > q3_min))
    throw ValidationError("arm: insertion limits require 0 < q3_min < q3_max");
}

void PDGains::validate() const {
  for (double k : kp)
    if (!(k > 0)) throw ValidationError("gains: kp must be > 0 per joint");
  for (double k : kd)
    if (k < 0) throw ValidationError("gains: kd must be >= 0 per joint");
}

Vec3 fk(const ArmModel& arm, const JointVec& q) {
  const double s2 = std::sin(q[1]), c2 = std::cos(q[1]);
  const double c1 = std::cos(q[0]), s1 = std::sin(q[0]);
  return {arm.remote_center[0] + q[2] * s2 * c1,
          arm.remote_center[1] + q[2] * s2 * s1,
          arm.remote_center[2] - q[2] * c2};
}

std::array<double, 3> ik(const ArmModel& arm, const Vec3& position, double previous_q1) {
  const double px = position[0] - arm.remote_center[0];
  const double py = position[1] - arm.remote_center[1];
  const double pz = position[2] - arm.remote_center[2];
  const double r = std::sqrt(px * px + py * py + pz * pz);
  if (r < arm.q3_min)
    throw UnreachableError("ik: |p| = " + std::to_string(r) + " below insertion minimum " +
                           std::to_string(arm.q3_min));
  if (r > arm.q3_max)
    throw UnreachableError("ik: |p| = " + std::to_string(r) + " above insertion maximum " +
                           std::to_string(arm.q3_max));
  double c = -pz / r;
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  const double q2 = std::acos(c);
  const double q1 = (std::sin(q2) < 1e-6) ? previous_q1 : std::atan2(py, px);
  return {q1, q2, r};
}

JointVec gravity_load(const ArmModel& arm, const JointVec& q) {
  // potential U = m g p_z = -m g q3 cos q2; load_i = dU/dq_i
  const double mg = arm.tool_mass * arm.gravity;
  return {0.0, mg * q[2] * std::sin(q[1]), -mg * std::cos(q[1]), 0.0};
}

JointVec pd_torque(const JointVec& q_desired, const JointVec& q, const JointVec& qdot,
                   const PDGains& gains, const JointVec& tau_gc) {
  JointVec tau;
  for (std::size_t i = 0; i < 4; ++i)
    tau[i] = gains.kp[i] * (q_desired[i] - q[i]) - gains.kd[i] * qdot[i] + tau_gc[i];
  return tau;
}

PlantStepInfo plant_step(const ArmModel& arm, PlantState& s, const JointVec& tau, double dt,
                         const JawBlock& jaw) {
  PlantStepInfo info;
  const JointVec g = gravity_load(arm, s.q);
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(tau[i]))
      throw SimulationFault("plant: non-finite torque on joint " + std::to_string(i));
    const double acc = (tau[i] - arm.damping[i] * s.qdot[i] - g[i]) / arm.inertia[i];
    s.qdot[i] += dt * acc;
    s.q[i] += dt * s.qdot[i];
  }
  auto clamp = [&](std::size_t i, double lo, double hi) {
    if (s.q[i] < lo) {
      s.q[i] = lo;
      s.qdot[i] = 0.0;
      info.hit_joint_limit = true;
    } else if (s.q[i] > hi) {
      s.q[i] = hi;
      s.qdot[i] = 0.0;
      info.hit_joint_limit = true;
    }
  };
  clamp(1, arm.q2_min, arm.q2_max);
  clamp(2, arm.q3_min, arm.q3_max);
  clamp(3, arm.qg_min, arm.qg_max);
  if (jaw.active && s.q[3] < jaw.min_angle) {
    s.q[3] = jaw.min_angle;
    if (s.qdot[3] < 0.0) s.qdot[3] = 0.0;
    info.jaw_blocked = true;
  }
  return info;
}

}  // namespace tgrasp
