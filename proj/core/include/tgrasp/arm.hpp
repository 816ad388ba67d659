#pragma once

#include <array>
#include <optional>

#include "tgrasp/types.hpp"

namespace tgrasp {

using Vec3 = std::array<double, 3>;
using JointVec = std::array<double, 4>;  // q1 yaw (rad), q2 pitch (rad), q3 insertion (m), qg gripper (rad)

// Remote-center arm: yaw/pitch about a fixed point plus insertion along
// the tool axis, with a gripper joint on the end effector. The tool
// direction is d(q1,q2) = (sin q2 cos q1, sin q2 sin q1, -cos q2), i.e.
// straight down at q2 = 0.
struct ArmModel {
  Vec3 remote_center = {0.0, 0.0, 0.0};
  // per-joint effective inertia (kg m^2 for revolute, kg for prismatic),
  // chosen so the loop is overdamped and settles fast at 1 kHz with the
  // default gains
  JointVec inertia = {5e-5, 5e-5, 2e-5, 3.125e-6};
  // per-joint viscous damping
  JointVec damping = {1e-4, 1e-4, 1e-4, 6.25e-4};
  double tool_mass = 0.02;        // kg, point mass at the tool tip
  double gravity = 9.81;          // m/s^2
  double gc_fidelity = 1.0;       // 1.0 = exact feedforward compensation
  double q3_min = 0.05;           // m, insertion limits (> 0)
  double q3_max = 0.20;
  double q2_min = 0.0;
  double q2_max = 1.30;           // rad
  double qg_min = 0.0;
  double qg_max = M_PI;           // rad, physical jaw stop

  void validate() const;
};

// Gains of the joint-space PD loop; defaults follow the manipulator
// controller this arm abstracts (first three joints + gripper).
struct PDGains {
  JointVec kp = {0.3, 0.3, 0.15, 0.02};
  JointVec kd = {0.008, 0.008, 0.01, 0.0};

  void validate() const;
};

// Tool-tip position relative to the remote center.
Vec3 fk(const ArmModel& arm, const JointVec& q);

// Closed-form inverse kinematics of the positioning joints. q1 is taken
// from previous_q1 on the singular ray (sin q2 < 1e-6). Throws
// UnreachableError naming the violated bound.
std::array<double, 3> ik(const ArmModel& arm, const Vec3& position, double previous_q1);

// Generalized gravity load g(q): the torque/force gravity exerts on each
// joint (tool point mass at tip).
JointVec gravity_load(const ArmModel& arm, const JointVec& q);

// tau_i = kp_i (q_des_i - q_i) - kd_i qdot_i + tau_gc_i. The derivative
// term acts on measured velocity only.
JointVec pd_torque(const JointVec& q_desired, const JointVec& q, const JointVec& qdot,
                   const PDGains& gains, const JointVec& tau_gc);

// While closing on a grasped object the jaw cannot go below the object's
// required angle.
struct JawBlock {
  bool active = false;
  double min_angle = 0.0;
};

struct PlantState {
  JointVec q{};
  JointVec qdot{};
};

struct PlantStepInfo {
  bool hit_joint_limit = false;
  bool jaw_blocked = false;
};

// Semi-implicit Euler on M qddot = tau - B qdot - g(q), with joint limits
// enforced by clamping at zero velocity. Throws SimulationFault on
// non-finite torque.
PlantStepInfo plant_step(const ArmModel& arm, PlantState& s, const JointVec& tau, double dt,
                         const JawBlock& jaw = {});

}  // namespace tgrasp
