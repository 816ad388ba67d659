#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tgrasp/arm.hpp"
#include "tgrasp/rng.hpp"
#include "tgrasp/types.hpp"

namespace tgrasp {

// Minimum jaw angle whose tip opening equals the given diameter:
// theta = 2 asin(d / (2 L)). Both arguments in metres. d == 2L maps to
// the pi boundary; larger diameters do not fit the jaws.
double aperture_for_diameter(double diameter_m, double jaw_length_m);
// Tip opening of a jaw angle, the inverse map: o = 2 L sin(theta / 2).
double tip_opening_for_angle(double angle_rad, double jaw_length_m);

// Minimum-jerk unit profile s(tau) = 10 tau^3 - 15 tau^4 + 6 tau^5 and
// its derivative; peak of sdot is 1.875 at tau = 1/2.
double minjerk_s(double tau);
double minjerk_sdot(double tau);

enum class Phenotype { during_reach, pre_opener, late_opener };
const char* to_string(Phenotype p);
Phenotype phenotype_from_string(const std::string& s);

// Population-level distribution of agent parameters: a mean and a
// between-subject jitter SD for each behavioural parameter, plus the
// phenotype mix. All angles rad, times s, tip openings mm.
struct PopulationParams {
  double reaction_mean = 0.35, reaction_mean_jitter = 0.05;
  double reaction_sd = 0.05, reaction_sd_jitter = 0.01;
  double transport_mean = 0.80, transport_mean_jitter = 0.06;
  double transport_sd = 0.05, transport_sd_jitter = 0.01;
  double mga_intercept = 0.3584, mga_intercept_jitter = 0.04;  // rad
  double mga_slope = 0.1364, mga_slope_jitter = 0.008;         // rad/mm
  double mga_sd = 0.05, mga_sd_jitter = 0.008;                 // rad
  double mga_timing_fraction = 0.65, mga_timing_fraction_jitter = 0.03;
  double ps_bias_mm = 4.0, ps_bias_jitter = 0.5;
  double weber_fraction = 0.08, weber_fraction_jitter = 0.01;
  double jaw_length = 0.010;  // m
  // ceiling model: compression starts guard below the ceiling, and the
  // compressed residual SD is headroom_sd_frac x remaining headroom
  double mga_guard = 0.05;   // rad
  double ps_guard = 0.02;    // rad
  double headroom_sd_frac = 0.12;
  // probability that a ceiling-pressured grasp still slams the master's
  // hard stop instead of backing off below the guard line
  double slam_prob = 0.04;
  double late_peak_fraction = 0.95;
  // during-reach / pre-opener / late-opener
  std::array<double, 3> phenotype_probs = {17.0 / 31.0, 10.0 / 31.0, 4.0 / 31.0};
};

struct AgentParams {
  double reaction_mean = 0.35, reaction_sd = 0.05;               // s
  double transport_duration_mean = 0.80, transport_duration_sd = 0.05;
  double mga_intercept = 0.3584;  // rad
  double mga_slope = 0.1364;      // rad/mm, > 0
  double mga_sd = 0.05;           // rad, size-independent
  double mga_timing_fraction = 0.65;
  double ps_bias = 4.0;           // mm
  double weber_fraction = 0.08;   // w: SD of perceived size = w * d
  Phenotype phenotype = Phenotype::during_reach;
  double jaw_length = 0.010;      // m
  double mga_guard = 0.05, ps_guard = 0.02, headroom_sd_frac = 0.12;
  double slam_prob = 0.04;
  double late_peak_fraction = 0.95;

  void validate() const;
};

struct SubjectAgent {
  std::string subject_id;
  AgentParams params;
  Condition condition = Condition::normal;
  std::uint64_t seed = 0;
};

SubjectAgent make_subject(std::uint64_t seed, Condition condition, const PopulationParams& pop);

// Intended slave MGA for one grasp. Draws Normal(intercept + slope d,
// mga_sd); draws above (ceiling - guard) are compressed into the guarded
// band with residual SD proportional to the headroom above the object's
// required angle, which reproduces the ceiling-induced drop of aperture
// variability under fine scaling. Returns nullopt when the required
// angle reaches the ceiling (infeasible trial).
std::optional<double> sample_mga(const AgentParams& a, double diameter_mm,
                                 const ScalingConfig& scaling, const MasterLimits& limits,
                                 Rng& rng);

// Pantomimed size: tip opening Normal(d + ps_bias, w d) in mm, converted
// to a jaw angle, with the same compression under the ceiling (milder
// guard).
std::optional<double> sample_ps(const AgentParams& a, double diameter_mm,
                                const ScalingConfig& scaling, const MasterLimits& limits,
                                Rng& rng);

// Straight-line minimum-jerk reach in master space, preceded by a
// stationary reaction period. Exposed for tests; trial programs embed it.
struct TransportProfile {
  double distance = 0;  // m
  double duration = 0;  // s
  double reaction = 0;  // s
  double position(double t) const;  // displacement along the path at time t since cue
  double speed(double t) const;
};
TransportProfile gen_transport(double distance, double duration, double reaction);

// --- trial programs -------------------------------------------------

// Scalar piecewise profile: hold segments between minimum-jerk blends.
struct ScalarSegment {
  double t0 = 0, t1 = 0, from = 0, to = 0;
};
struct ScalarProfile {
  double initial = 0;
  std::vector<ScalarSegment> segments;  // ordered, non-overlapping
  double value(double t) const;
  double rate(double t) const;
  void add(double t0, double t1, double from, double to) { segments.push_back({t0, t1, from, to}); }
};

struct PathSegment {
  double t0 = 0, t1 = 0;
  Vec3 from{}, to{};
};
struct PathProfile {
  Vec3 initial{};
  std::vector<PathSegment> segments;
  Vec3 value(double t) const;
};

struct TrialTiming {
  double ready = 0.300;         // s before GO
  double min_reaction = 0.15;
  double min_transport = 0.40;
  double grasp_settle = 0.15;
  double squeeze = 0.04;        // rad commanded below the required angle while holding
  double lift_duration = 0.50;
  double lift_height = 0.020;   // m, slave
  double hold_after_lift = 0.10;
  double release_open = 0.25;   // rad, slave
  double release_duration = 0.12;
  double tail = 0.20;
  double reach_distance = 0.040;  // m, slave
  double capture_radius = 0.010;  // m
  double pantomime_open = 0.45;
  double pantomime_hold = 0.80;
  double pantomime_close = 0.35;
  double post_confirm_go = 0.55;
};

// Ground-truth timeline of one trial; times are seconds from trial start.
// Unset events are negative.
struct TrialTruth {
  double go = -1;        // object appearance / GO cue for the reach
  double shown = -1;     // perception: object appearance
  double confirm = -1;   // perception: pantomime confirmed
  double onset = -1;     // master transport starts
  double mga = -1;       // commanded aperture peak
  double close_end = -1; // commanded aperture reaches the grasp target
  double lift_start = -1;
  double lift_end = -1;
  double release = -1;
  double reaction = 0, transport_duration = 0;
  double intended_mga = 0;   // rad, slave
  double intended_ps = 0;    // rad, slave (perception only)
  double required_angle = 0; // rad
};

// Master-side command program for one trial: position path and gripper
// command (already divided by g_grasper and clamped to the master range).
struct MasterProgram {
  PathProfile position;
  ScalarProfile aperture;  // master gripper angle
  double duration = 0;     // s
  bool feasible = true;
  TrialTruth truth;
};

struct SceneConfig {
  Vec3 master_home = {0, 0, 0};
  Vec3 reach_dir = {0.8, 0.6, 0.0};  // unit, horizontal
};

MasterProgram build_trial_program(const SubjectAgent& agent, double diameter_mm,
                                  Experiment experiment, const ScalingConfig& scaling,
                                  const MasterLimits& limits, const TrialTiming& timing,
                                  const SceneConfig& scene, Rng& rng);

}  // namespace tgrasp
