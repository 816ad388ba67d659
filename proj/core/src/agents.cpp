#include "tgrasp/agents.hpp"

#include <algorithm>
#include <cmath>

namespace tgrasp {

double aperture_for_diameter(double diameter_m, double jaw_length_m) {
  if (diameter_m < 0) throw ValidationError("aperture: diameter must be >= 0");
  if (!(jaw_length_m > 0)) throw ValidationError("aperture: jaw length must be > 0");
  const double ratio = diameter_m / (2.0 * jaw_length_m);
  if (ratio > 1.0)
    throw ValidationError("aperture: diameter " + std::to_string(diameter_m * 1e3) +
                          " mm exceeds jaw capacity " + std::to_string(2e3 * jaw_length_m) + " mm");
  return 2.0 * std::asin(ratio);
}

double tip_opening_for_angle(double angle_rad, double jaw_length_m) {
  return 2.0 * jaw_length_m * std::sin(angle_rad / 2.0);
}

double minjerk_s(double tau) {
  if (tau <= 0) return 0;
  if (tau >= 1) return 1;
  const double t3 = tau * tau * tau;
  return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

double minjerk_sdot(double tau) {
  if (tau <= 0 || tau >= 1) return 0;
  const double t2 = tau * tau;
  return 30.0 * t2 - 60.0 * t2 * tau + 30.0 * t2 * t2;
}

const char* to_string(Phenotype p) {
  switch (p) {
    case Phenotype::during_reach: return "during_reach";
    case Phenotype::pre_opener: return "pre_opener";
    default: return "late_opener";
  }
}

Phenotype phenotype_from_string(const std::string& s) {
  if (s == "during_reach") return Phenotype::during_reach;
  if (s == "pre_opener") return Phenotype::pre_opener;
  if (s == "late_opener") return Phenotype::late_opener;
  throw ValidationError("unknown phenotype: " + s);
}

void AgentParams::validate() const {
  if (!(mga_sd > 0)) throw ValidationError("agent: mga_sd must be > 0");
  if (!(weber_fraction > 0)) throw ValidationError("agent: weber fraction must be > 0");
  if (!(mga_slope > 0)) throw ValidationError("agent: mga_slope must be > 0");
  if (phenotype == Phenotype::during_reach &&
      !(mga_timing_fraction > 0 && mga_timing_fraction < 1))
    throw ValidationError("agent: mga_timing_fraction must be in (0,1)");
  if (!(jaw_length > 0)) throw ValidationError("agent: jaw_length must be > 0");
}

SubjectAgent make_subject(std::uint64_t seed, Condition condition, const PopulationParams& pop) {
  SubjectAgent agent;
  agent.condition = condition;
  agent.seed = seed;
  Rng rng(hash_combine(seed, 0xa9e47ULL));
  AgentParams& p = agent.params;
  auto jitter = [&](double mean, double sd, double lo, double hi) {
    return std::clamp(rng.gaussian(mean, sd), lo, hi);
  };
  p.reaction_mean = jitter(pop.reaction_mean, pop.reaction_mean_jitter, 0.20, 0.80);
  p.reaction_sd = jitter(pop.reaction_sd, pop.reaction_sd_jitter, 0.01, 0.20);
  p.transport_duration_mean = jitter(pop.transport_mean, pop.transport_mean_jitter, 0.50, 1.40);
  p.transport_duration_sd = jitter(pop.transport_sd, pop.transport_sd_jitter, 0.01, 0.20);
  p.mga_intercept = jitter(pop.mga_intercept, pop.mga_intercept_jitter, 0.10, 0.80);
  p.mga_slope = jitter(pop.mga_slope, pop.mga_slope_jitter, 0.05, 0.30);
  p.mga_sd = jitter(pop.mga_sd, pop.mga_sd_jitter, 0.015, 0.15);
  p.mga_timing_fraction =
      jitter(pop.mga_timing_fraction, pop.mga_timing_fraction_jitter, 0.30, 0.85);
  p.ps_bias = jitter(pop.ps_bias_mm, pop.ps_bias_jitter, -2.0, 7.0);
  p.weber_fraction = jitter(pop.weber_fraction, pop.weber_fraction_jitter, 0.02, 0.20);
  p.jaw_length = pop.jaw_length;
  p.mga_guard = pop.mga_guard;
  p.ps_guard = pop.ps_guard;
  p.headroom_sd_frac = pop.headroom_sd_frac;
  p.slam_prob = pop.slam_prob;
  p.late_peak_fraction = pop.late_peak_fraction;
  const double u = rng.next_double();
  if (u < pop.phenotype_probs[0])
    p.phenotype = Phenotype::during_reach;
  else if (u < pop.phenotype_probs[0] + pop.phenotype_probs[1])
    p.phenotype = Phenotype::pre_opener;
  else
    p.phenotype = Phenotype::late_opener;
  p.validate();
  return agent;
}

namespace {

// Compress a draw that landed above (ceiling - guard): it is re-issued
// just below the guard line carrying its own noise residual, shrunk to an
// SD proportional to the headroom above the object's required angle.
double compress_draw(double draw, double mean, double draw_sd, double ceiling, double guard,
                     double required, double headroom_sd_frac) {
  const double limit = ceiling - guard;
  if (draw <= limit) return std::max(draw, required);
  const double z = (draw - mean) / draw_sd;
  const double headroom = std::max(0.0, limit - required);
  const double m = limit - std::abs(z) * headroom_sd_frac * headroom;
  return std::max(m, required);
}

}  // namespace

std::optional<double> sample_mga(const AgentParams& a, double diameter_mm,
                                 const ScalingConfig& scaling, const MasterLimits& limits,
                                 Rng& rng) {
  const double required = aperture_for_diameter(mm_to_m(diameter_mm), a.jaw_length);
  const double ceiling = scaling.g_grasper * limits.gripper_range;
  if (required >= ceiling) return std::nullopt;
  const double mean = a.mga_intercept + a.mga_slope * diameter_mm;
  const double draw = mean + a.mga_sd * rng.gaussian();
  if (draw > ceiling - a.mga_guard && rng.bernoulli(a.slam_prob))
    return ceiling;  // hits the master's hard stop
  return compress_draw(draw, mean, a.mga_sd, ceiling, a.mga_guard, required, a.headroom_sd_frac);
}

std::optional<double> sample_ps(const AgentParams& a, double diameter_mm,
                                const ScalingConfig& scaling, const MasterLimits& limits,
                                Rng& rng) {
  const double required = aperture_for_diameter(mm_to_m(diameter_mm), a.jaw_length);
  const double ceiling = scaling.g_grasper * limits.gripper_range;
  if (required >= ceiling) return std::nullopt;
  const double jaw_mm = m_to_mm(a.jaw_length);
  const double tip_sd_mm = a.weber_fraction * diameter_mm;
  const double tip_mm = diameter_mm + a.ps_bias + tip_sd_mm * rng.gaussian();
  const double tip_max = 2.0 * jaw_mm * (1.0 - 1e-12);
  const double angle = aperture_for_diameter(mm_to_m(std::clamp(tip_mm, 0.0, tip_max)),
                                             a.jaw_length);
  // draw SD in angle units at the mean, for the compression residual
  const double mean_tip = std::clamp(diameter_mm + a.ps_bias, 1e-9, tip_max);
  const double mean_angle = aperture_for_diameter(mm_to_m(mean_tip), a.jaw_length);
  const double dtheta_do = 1.0 / (jaw_mm * std::cos(mean_angle / 2.0));  // rad per mm
  const double angle_sd = std::max(1e-9, tip_sd_mm * dtheta_do);
  const double out = compress_draw(angle, mean_angle, angle_sd, ceiling, a.ps_guard, required,
                                   a.headroom_sd_frac);
  return std::max(0.0, out);
}

double TransportProfile::position(double t) const {
  if (t <= reaction) return 0.0;
  return distance * minjerk_s((t - reaction) / duration);
}

double TransportProfile::speed(double t) const {
  if (t <= reaction) return 0.0;
  return distance / duration * minjerk_sdot((t - reaction) / duration);
}

TransportProfile gen_transport(double distance, double duration, double reaction) {
  if (!(distance > 0) || !(duration > 0))
    throw ValidationError("transport: distance and duration must be > 0");
  return {distance, duration, reaction};
}

double ScalarProfile::value(double t) const {
  double v = initial;
  for (const auto& s : segments) {
    if (t < s.t0) return v;
    if (t <= s.t1) {
      const double tau = (s.t1 > s.t0) ? (t - s.t0) / (s.t1 - s.t0) : 1.0;
      return s.from + (s.to - s.from) * minjerk_s(tau);
    }
    v = s.to;
  }
  return v;
}

double ScalarProfile::rate(double t) const {
  for (const auto& s : segments) {
    if (t < s.t0) return 0.0;
    if (t <= s.t1) {
      const double span = s.t1 - s.t0;
      if (span <= 0) return 0.0;
      return (s.to - s.from) / span * minjerk_sdot((t - s.t0) / span);
    }
  }
  return 0.0;
}

Vec3 PathProfile::value(double t) const {
  Vec3 v = initial;
  for (const auto& s : segments) {
    if (t < s.t0) return v;
    if (t <= s.t1) {
      const double tau = (s.t1 > s.t0) ? (t - s.t0) / (s.t1 - s.t0) : 1.0;
      const double m = minjerk_s(tau);
      return {s.from[0] + (s.to[0] - s.from[0]) * m, s.from[1] + (s.to[1] - s.from[1]) * m,
              s.from[2] + (s.to[2] - s.from[2]) * m};
    }
    v = s.to;
  }
  return v;
}

namespace {

// Append the reach-grasp-lift-release choreography starting at the GO
// cue; returns the end time. Master aperture commands are slave targets
// divided by g_grasper (clamped to the master range by the caller's
// sampling loop, and by construction kept inside it here).
double build_action_phase(MasterProgram& prog, const SubjectAgent& agent, double mga_slave,
                          double required, double t_go, const ScalingConfig& scaling,
                          const MasterLimits& limits, const TrialTiming& timing,
                          const SceneConfig& scene, Rng& rng) {
  const AgentParams& p = agent.params;
  TrialTruth& tr = prog.truth;

  const double reaction =
      std::max(timing.min_reaction, rng.gaussian(p.reaction_mean, p.reaction_sd));
  const double T =
      std::max(timing.min_transport, rng.gaussian(p.transport_duration_mean, p.transport_duration_sd));
  tr.reaction = reaction;
  tr.transport_duration = T;
  const double onset = t_go + reaction;
  tr.go = t_go;
  tr.onset = onset;

  // master-space reach: slave distance divided by the Cartesian gain
  const double master_dist = timing.reach_distance / scaling.g_cartesian;
  Vec3 from = scene.master_home;
  Vec3 to = {from[0] + scene.reach_dir[0] * master_dist, from[1] + scene.reach_dir[1] * master_dist,
             from[2] + scene.reach_dir[2] * master_dist};
  prog.position.segments.push_back({onset, onset + T, from, to});

  auto to_master = [&](double slave_angle) {
    return std::clamp(slave_angle / scaling.g_grasper, 0.0, limits.gripper_range);
  };
  const double m_mga = to_master(mga_slave);
  const double m_grip = to_master(std::max(0.0, required - timing.squeeze));
  const double a0 = prog.aperture.segments.empty()
                        ? prog.aperture.initial
                        : prog.aperture.segments.back().to;

  double t_close_end = onset + T;
  switch (p.phenotype) {
    case Phenotype::during_reach: {
      const double t_peak = onset + p.mga_timing_fraction * T;
      prog.aperture.add(onset, t_peak, a0, m_mga);
      prog.aperture.add(t_peak, onset + T, m_mga, m_grip);
      tr.mga = t_peak;
      break;
    }
    case Phenotype::pre_opener: {
      const double open_start = t_go + 0.15 * reaction;
      const double open_end = t_go + 0.80 * reaction;
      // a slight relaxation after the peak keeps the aperture maximum
      // unique (a flat hold would leave the argmax ill-defined)
      const double sag = std::min(0.03 / scaling.g_grasper, 0.2 * (m_mga - m_grip));
      prog.aperture.add(open_start, open_end, a0, m_mga);
      prog.aperture.add(open_end, open_end + 0.10, m_mga, m_mga - sag);
      prog.aperture.add(onset + 0.70 * T, onset + T, m_mga - sag, m_grip);
      tr.mga = open_end;  // before transport onset: analyzer clamps the fraction to 0
      break;
    }
    case Phenotype::late_opener: {
      const double t_peak = onset + p.late_peak_fraction * T;
      t_close_end = onset + T + 0.15;
      prog.aperture.add(onset + 0.30 * T, t_peak, a0, m_mga);
      prog.aperture.add(t_peak, t_close_end, m_mga, m_grip);
      tr.mga = t_peak;
      break;
    }
  }
  tr.close_end = t_close_end;

  const double lift_start = t_close_end + timing.grasp_settle;
  const double lift_end = lift_start + timing.lift_duration;
  Vec3 lifted = {to[0], to[1], to[2] + timing.lift_height / scaling.g_cartesian};
  prog.position.segments.push_back({lift_start, lift_end, to, lifted});
  tr.lift_start = lift_start;
  tr.lift_end = lift_end;

  const double release = lift_end + timing.hold_after_lift;
  prog.aperture.add(release, release + timing.release_duration, m_grip,
                    to_master(required + timing.release_open));
  tr.release = release;
  return release + timing.release_duration + timing.tail;
}

}  // namespace

MasterProgram build_trial_program(const SubjectAgent& agent, double diameter_mm,
                                  Experiment experiment, const ScalingConfig& scaling,
                                  const MasterLimits& limits, const TrialTiming& timing,
                                  const SceneConfig& scene, Rng& rng) {
  MasterProgram prog;
  prog.position.initial = scene.master_home;
  prog.aperture.initial = 0.0;

  const AgentParams& p = agent.params;
  const double required = aperture_for_diameter(mm_to_m(diameter_mm), p.jaw_length);
  prog.truth.required_angle = required;

  auto mga = sample_mga(p, diameter_mm, scaling, limits, rng);
  if (!mga) {
    prog.feasible = false;
    prog.duration = timing.ready;
    return prog;
  }
  prog.truth.intended_mga = *mga;

  double t = timing.ready;
  if (experiment == Experiment::perception) {
    auto ps = sample_ps(p, diameter_mm, scaling, limits, rng);
    if (!ps) {
      prog.feasible = false;
      prog.duration = timing.ready;
      return prog;
    }
    prog.truth.intended_ps = *ps;
    prog.truth.shown = t;
    const double m_ps = std::clamp(*ps / scaling.g_grasper, 0.0, limits.gripper_range);
    const double pr = std::max(0.25, rng.gaussian(1.3 * p.reaction_mean, p.reaction_sd));
    const double open_start = t + pr;
    const double hold_start = open_start + timing.pantomime_open;
    const double confirm = hold_start + timing.pantomime_hold;
    prog.aperture.add(open_start, hold_start, 0.0, m_ps);
    prog.aperture.add(confirm, confirm + timing.pantomime_close, m_ps, 0.0);
    prog.truth.confirm = confirm;
    t = confirm + timing.pantomime_close + timing.post_confirm_go;
  }

  prog.duration = build_action_phase(prog, agent, *mga, required, t, scaling, limits, timing,
                                     scene, rng);
  return prog;
}

}  // namespace tgrasp
