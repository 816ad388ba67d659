#include "tgrasp/teleop.hpp"

#include <algorithm>
#include <cmath>

namespace tgrasp {

StateVector scale_map(const StateVector& user, const ClutchRefs& refs,
                      const ScalingConfig& scaling) {
  const auto u = user.as_array();
  const auto l = refs.local_ref.as_array();
  const auto r = refs.remote_ref.as_array();
  std::array<double, 7> out;
  for (std::size_t i = 0; i < 7; ++i) {
    const double g = i < 3 ? scaling.g_cartesian : (i < 6 ? scaling.g_orientation : scaling.g_grasper);
    out[i] = r[i] + g * (u[i] - l[i]);
  }
  if (out[6] < 0.0) out[6] = 0.0;
  return StateVector::from_array(out);
}

double TrialLog::event(const std::string& name) const {
  for (const auto& [n, t] : events)
    if (n == name) return t;
  return -1.0;
}

void TeleopConfig::validate() const {
  scaling.validate();
  limits.validate();
  channel.validate();
  arm.validate();
  gains.validate();
  if (!(dt > 0)) throw ValidationError("teleop: dt must be > 0");
}

TeleopConfig config_for(Condition condition) {
  TeleopConfig cfg;
  cfg.scaling = scaling_for(condition);
  return cfg;
}

std::uint64_t derive_trial_seed(std::uint64_t master_seed, const std::string& subject_id,
                                Experiment experiment, int trial_index) {
  std::uint64_t h = hash_combine(master_seed, 0x7210a1ULL);
  h = hash_str(h, subject_id.c_str());
  h = hash_combine(h, static_cast<std::uint64_t>(experiment) + 41);
  h = hash_combine(h, static_cast<std::uint64_t>(trial_index) + 1);
  return h;
}

namespace {

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

}  // namespace

TrialLog run_trial(const SubjectAgent& agent, const TrialSlot& slot, Experiment experiment,
                   const TeleopConfig& cfg, std::uint64_t trial_seed) {
  cfg.validate();
  Rng rng(trial_seed);
  Rng program_rng = rng.fork(1);

  MasterProgram prog = build_trial_program(agent, slot.object.diameter_mm, experiment,
                                           cfg.scaling, cfg.limits, cfg.timing, cfg.scene,
                                           program_rng);

  TrialLog log;
  TrialMeta& meta = log.meta;
  meta.subject_id = agent.subject_id;
  meta.condition = agent.condition;
  meta.experiment = experiment;
  meta.trial_index = slot.index;
  meta.object_mm = slot.object.diameter_mm;
  meta.is_training = slot.is_training;
  meta.seed = trial_seed;
  meta.feasible = prog.feasible;
  meta.ceiling = cfg.scaling.g_grasper * cfg.limits.gripper_range;
  meta.required_angle = prog.truth.required_angle;
  meta.intended_mga = prog.truth.intended_mga;
  meta.intended_ps = prog.truth.intended_ps;
  meta.jaw_length = agent.params.jaw_length;
  meta.start_pos = add(cfg.arm.remote_center, cfg.slave_start);
  Vec3 reach = {cfg.scene.reach_dir[0] * cfg.timing.reach_distance,
                cfg.scene.reach_dir[1] * cfg.timing.reach_distance,
                cfg.scene.reach_dir[2] * cfg.timing.reach_distance};
  meta.object_pos = add(meta.start_pos, reach);
  if (!prog.feasible) return log;

  // clutch in: master at home, slave at the start pose, both closed
  StateVector master0;
  master0.x = cfg.scene.master_home[0];
  master0.y = cfg.scene.master_home[1];
  master0.z = cfg.scene.master_home[2];
  StateVector slave0;
  slave0.x = meta.start_pos[0];
  slave0.y = meta.start_pos[1];
  slave0.z = meta.start_pos[2];
  const ClutchRefs refs = clutch_engage(master0, slave0);

  ChannelConfig ch_cfg = cfg.channel;
  ch_cfg.seed = hash_combine(trial_seed, 0xc4a2ULL);
  Channel channel(ch_cfg);

  PlantState plant;
  {
    auto q123 = ik(cfg.arm, {slave0.x, slave0.y, slave0.z}, 0.0);
    plant.q = {q123[0], q123[1], q123[2], 0.0};
  }
  JointVec q_desired = plant.q;
  double prev_q1 = plant.q[0];

  struct ObjectState {
    Vec3 pos;
    bool attached = false;
    Vec3 grip_offset{};
  } object{meta.object_pos, false, {}};

  const double dt = cfg.dt;
  const std::size_t steps = static_cast<std::size_t>(std::ceil(prog.duration / dt)) + 1;
  log.t.reserve(steps);
  log.x.reserve(steps);
  log.y.reserve(steps);
  log.z.reserve(steps);
  log.aperture.reserve(steps);
  log.master_aperture.reserve(steps);

  bool contacted = false;
  double contact_time = -1.0;

  for (std::size_t i = 0; i < steps; ++i) {
    const double now = static_cast<double>(i) * dt;

    // master side: sample the program and stream the desired state
    Vec3 mpos = prog.position.value(now);
    double map = prog.aperture.value(now);
    // resting against the hard stop; 1e-6 rad absorbs sampling off the
    // exact profile peak
    if (map >= cfg.limits.gripper_range - 1e-6) {
      map = cfg.limits.gripper_range;
      ++meta.at_limit_samples;
    }
    StateVector master;
    master.x = mpos[0];
    master.y = mpos[1];
    master.z = mpos[2];
    master.gripper = map;

    Datagram d;
    d.seq = i + 1;
    d.t_send_us = static_cast<std::uint64_t>(i) * 1000ULL;
    d.desired = master;
    // exercise the real wire layout on every packet
    const auto bytes = wire_encode(d);
    channel.send(wire_decode(bytes.data(), bytes.size()), now);

    // slave side: apply the newest deliverable command (zero-order hold)
    if (auto got = channel.receive(now)) {
      StateVector des = scale_map(got->desired, refs, cfg.scaling);
      Vec3 p = {des.x, des.y, des.z};
      // keep the command inside the reachable annulus
      Vec3 rel = sub(p, cfg.arm.remote_center);
      const double r = norm(rel);
      const double lo = cfg.arm.q3_min + 1e-6, hi = cfg.arm.q3_max - 1e-6;
      if (r < lo || r > hi) {
        const double scale = std::clamp(r, lo, hi) / r;
        p = add(cfg.arm.remote_center, Vec3{rel[0] * scale, rel[1] * scale, rel[2] * scale});
        ++meta.unreachable_samples;
      }
      auto q123 = ik(cfg.arm, p, prev_q1);
      prev_q1 = q123[0];
      q_desired = {q123[0], q123[1], q123[2],
                   std::clamp(des.gripper, cfg.arm.qg_min, cfg.arm.qg_max)};
    }

    JointVec tau_gc = gravity_load(cfg.arm, plant.q);
    for (double& v : tau_gc) v *= cfg.arm.gc_fidelity;
    const JointVec tau = pd_torque(q_desired, plant.q, plant.qdot, cfg.gains, tau_gc);

    const Vec3 tip_before = fk(cfg.arm, plant.q);
    JawBlock jaw;
    jaw.active = norm(sub(tip_before, object.pos)) <= cfg.timing.capture_radius;
    jaw.min_angle = meta.required_angle;
    const PlantStepInfo info = plant_step(cfg.arm, plant, tau, dt, jaw);

    const Vec3 tip = fk(cfg.arm, plant.q);
    if (info.jaw_blocked && !contacted && now > prog.truth.onset) {
      contacted = true;
      contact_time = now;
      object.attached = true;
      object.grip_offset = sub(object.pos, tip);
    }
    if (object.attached) {
      if (prog.truth.release >= 0 && now >= prog.truth.release) {
        object.attached = false;  // released at height
      } else {
        object.pos = add(tip, object.grip_offset);
      }
    }

    log.t.push_back(now);
    log.x.push_back(tip[0]);
    log.y.push_back(tip[1]);
    log.z.push_back(tip[2]);
    log.aperture.push_back(plant.q[3]);
    log.master_aperture.push_back(map);
  }

  // protocol events first, then ground-truth kinematic markers
  const TrialTruth& tr = prog.truth;
  if (experiment == Experiment::perception) {
    log.add_event("shown", tr.shown);
    log.add_event("confirm", tr.confirm);
  }
  log.add_event("go", tr.go);
  log.add_event("onset", tr.onset);
  log.add_event("mga", tr.mga);
  if (contact_time >= 0) log.add_event("contact", contact_time);
  log.add_event("lift_end", tr.lift_end);
  log.add_event("release", tr.release);
  std::sort(log.events.begin(), log.events.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return log;
}

}  // namespace tgrasp
