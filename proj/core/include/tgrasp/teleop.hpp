#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tgrasp/agents.hpp"
#include "tgrasp/arm.hpp"
#include "tgrasp/channel.hpp"
#include "tgrasp/plan.hpp"
#include "tgrasp/types.hpp"

namespace tgrasp {

// Reference poses captured together when the operator clutches in, so
// master and slave workspaces align without moving the tool.
struct ClutchRefs {
  StateVector local_ref;
  StateVector remote_ref;
};

inline ClutchRefs clutch_engage(const StateVector& master, const StateVector& slave) {
  return {master, slave};
}

// Component-wise scaling map from the user state to the desired remote
// state: x_des_i = remote_ref_i + g_i (x_user_i - local_ref_i), with the
// Cartesian gain on x/y/z, the orientation gain on ax/ay/az and the
// grasper gain on the gripper. The commanded aperture is clamped at 0.
StateVector scale_map(const StateVector& user, const ClutchRefs& refs,
                      const ScalingConfig& scaling);

struct TrialMeta {
  std::string subject_id;
  Condition condition = Condition::normal;
  Experiment experiment = Experiment::action;
  int trial_index = 0;
  double object_mm = 8.0;
  bool is_training = false;
  std::uint64_t seed = 0;
  bool feasible = true;
  double ceiling = 0;         // g_grasper x master gripper range, rad
  double required_angle = 0;  // rad
  double intended_mga = 0;    // rad, generative ground truth
  double intended_ps = 0;     // rad, perception trials
  double jaw_length = 0.010;  // m
  int at_limit_samples = 0;   // master gripper samples clamped at its range
  int unreachable_samples = 0;
  Vec3 start_pos{}, object_pos{};  // slave workspace, m
  std::string software_version = kVersion;
};

// 1 kHz recording of one trial: slave tool tip, slave aperture and the
// master aperture command, plus the event timeline.
struct TrialLog {
  TrialMeta meta;
  std::vector<double> t, x, y, z, aperture, master_aperture;
  std::vector<std::pair<std::string, double>> events;

  double event(const std::string& name) const;  // -1 when absent
  void add_event(const std::string& name, double time) { events.emplace_back(name, time); }
  std::size_t size() const { return t.size(); }
};

struct TeleopConfig {
  ScalingConfig scaling;
  MasterLimits limits;
  ChannelConfig channel;
  ArmModel arm;
  PDGains gains;
  TrialTiming timing;
  SceneConfig scene;
  Vec3 slave_start = {0.03, 0.01, -0.10};  // relative to the remote center
  double dt = 1e-3;

  void validate() const;
};

TeleopConfig config_for(Condition condition);

// Runs the full trial state machine at 1 kHz: ready period, GO, the
// agent-driven master stream through the channel, scaling map, inverse
// kinematics and PD control into the plant; perception trials prepend the
// pantomime phase. Ground-truth markers are logged for validation only.
TrialLog run_trial(const SubjectAgent& agent, const TrialSlot& slot, Experiment experiment,
                   const TeleopConfig& cfg, std::uint64_t trial_seed);

std::uint64_t derive_trial_seed(std::uint64_t master_seed, const std::string& subject_id,
                                Experiment experiment, int trial_index);

}  // namespace tgrasp
