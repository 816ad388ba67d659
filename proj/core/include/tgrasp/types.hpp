#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tgrasp {

inline constexpr const char* kVersion = "0.1.0";

// Unit helpers; everything internal is SI (m, rad, s). Millimetres and
// degrees appear only at CLI/file boundaries.
inline constexpr double mm_to_m(double mm) { return mm * 1e-3; }
inline constexpr double m_to_mm(double m) { return m * 1e3; }
inline constexpr double deg_to_rad(double d) { return d * M_PI / 180.0; }

struct SimulationFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnreachableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pose + grip sample of either manipulator: Cartesian position,
// orientation, and gripper aperture angle.
struct StateVector {
  double x = 0, y = 0, z = 0;     // m
  double ax = 0, ay = 0, az = 0;  // rad
  double gripper = 0;             // rad, >= 0

  std::array<double, 7> as_array() const { return {x, y, z, ax, ay, az, gripper}; }
  static StateVector from_array(const std::array<double, 7>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6]};
  }

  bool finite() const {
    for (double v : as_array())
      if (!std::isfinite(v)) return false;
    return true;
  }
  bool valid() const { return finite() && gripper >= 0.0; }
};

// Per-component gains of the master-to-slave map. Cartesian and
// orientation gains are shared across their components; the grasper gain
// is the experimental condition.
struct ScalingConfig {
  double g_cartesian = 0.5;
  double g_orientation = 0.0;
  double g_grasper = 5.0;

  void validate() const {
    if (!(g_grasper > 0)) throw ValidationError("scaling: g_grasper must be > 0");
    if (g_cartesian < 0 || g_orientation < 0)
      throw ValidationError("scaling: cartesian/orientation gains must be >= 0");
  }
};

enum class Condition { fine, normal, quick };
enum class Experiment { action, perception };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::fine: return "fine";
    case Condition::normal: return "normal";
    default: return "quick";
  }
}
inline const char* to_string(Experiment e) {
  return e == Experiment::action ? "action" : "perception";
}
Condition condition_from_string(const std::string& s);
Experiment experiment_from_string(const std::string& s);

inline double grasper_gain(Condition c) {
  switch (c) {
    case Condition::fine: return 3.0;
    case Condition::normal: return 5.0;
    default: return 7.0;
  }
}
inline ScalingConfig scaling_for(Condition c) {
  ScalingConfig s;
  s.g_grasper = grasper_gain(c);
  return s;
}

// Master-side hardware limits. The gripper handle covers a 30 degree
// aperture range, about 3 cm of finger opening.
struct MasterLimits {
  double gripper_range = deg_to_rad(30.0);  // rad
  double grip_span = 0.03;                  // m, informational

  void validate() const {
    if (!(gripper_range > 0)) throw ValidationError("limits: gripper_range must be > 0");
  }
};

struct ObjectSpec {
  double diameter_mm = 8.0;

  void validate() const {
    if (!(diameter_mm > 0)) throw ValidationError("object: diameter must be > 0");
  }
};

inline const std::array<double, 5> kObjectSetMm = {4.0, 6.0, 8.0, 10.0, 12.0};

}  // namespace tgrasp
