#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tgrasp/filter.hpp"
#include "tgrasp/teleop.hpp"

namespace tgrasp {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct AnalysisConfig {
  int downsample = 10;            // 1 kHz -> 100 Hz
  int filter_order = 4;
  double filter_cutoff_hz = 10.0;
  double onset_frac = 0.05;       // of peak endpoint speed
  double onset_floor_frac = 0.005;
  double onset_hold = 0.050;      // s the speed must stay above threshold
  double end_frac = 0.05;
  double capture_radius = 0.012;  // m, transport must end near the object
  double lift_thresh = 0.015;     // m of vertical displacement
  double hold_speed_thresh = 0.05;   // rad/s, pantomime hold detector
  double hold_min_duration = 0.200;  // s
  double min_peak_speed = 0.005;     // m/s, below this the trial is unanalyzable
  double max_exclusion_rate = 0.05;  // analyze command fails above this
};

// 100 Hz filtered view of a trial, with derivative traces.
struct FilteredTrial {
  TrialMeta meta;
  std::vector<std::pair<std::string, double>> events;  // copied from the log
  std::vector<double> t, x, y, z, aperture, master_aperture;
  std::vector<double> speed;           // m/s, endpoint, central differences
  std::vector<double> aperture_speed;  // rad/s

  double event(const std::string& name) const;
  double fs() const { return t.size() > 1 ? 1.0 / (t[1] - t[0]) : 0.0; }
};

// Decimate to 100 Hz then zero-phase filter every channel. Throws
// ValidationError when the stream is too short for the filter padding.
FilteredTrial preprocess(const TrialLog& log, const AnalysisConfig& cfg = {});

// Events estimated from kinematics alone (ground-truth markers in the log
// are never consulted; the protocol cues go/shown/confirm are).
struct DetectedEvents {
  bool analyzable = false;
  std::string reason;
  double appearance = -1;     // go (action) or shown (perception)
  double onset = -1;
  double transport_end = -1;
  double mga_time = -1;
  double lift_end = -1;
  double pantomime_time = -1; // perception: middle of the held gesture
  double confirm = -1;        // perception protocol cue
};

DetectedEvents detect_events(const FilteredTrial& ft, const AnalysisConfig& cfg = {});

struct TrialMetrics {
  std::string subject_id;
  Condition condition = Condition::normal;
  Experiment experiment = Experiment::action;
  int trial_index = 0;
  double object_mm = 0;
  bool is_training = false;
  bool analyzable = false;
  std::string exclude_reason;

  double mga = kMissing;                  // rad
  double mga_time_fraction = kMissing;    // clamped to [0,1]
  double ps = kMissing;                   // rad, perception only
  double reaction_time = kMissing;        // s
  double transport_time = kMissing;       // s
  double total_time = kMissing;           // s
  double perception_time = kMissing;      // s, perception only
  double path_length = kMissing;          // mm
  double peak_endpoint_speed = kMissing;  // mm/s
  double peak_aperture_speed = kMissing;  // rad/s

  // generative ground truth, carried through for validation only
  double truth_intended_mga = kMissing;
  double truth_intended_ps = kMissing;
  double truth_onset = kMissing;
  double truth_mga_time = kMissing;
  double truth_ceiling = kMissing;
};

inline constexpr std::array<const char*, 10> kMetricNames = {
    "mga",        "mga_time_fraction", "ps",          "reaction_time",
    "transport_time", "total_time",    "perception_time", "path_length",
    "peak_endpoint_speed", "peak_aperture_speed"};

double metric_value(const TrialMetrics& m, int metric_index);

TrialMetrics compute_metrics(const FilteredTrial& ft, const DetectedEvents& ev,
                             const AnalysisConfig& cfg = {});

// analyze = preprocess + detect + compute, with unanalyzable trials
// reported rather than thrown.
TrialMetrics analyze_trial(const TrialLog& log, const AnalysisConfig& cfg = {});

// Per subject x object x experiment aggregate of each metric.
struct SubjectStats {
  std::string subject_id;
  Condition condition = Condition::normal;
  Experiment experiment = Experiment::action;
  double object_mm = 0;
  std::array<int, 10> n{};
  std::array<double, 10> mean{};    // kMissing when n == 0
  std::array<double, 10> sd{};      // kMissing when n < 2
  std::array<bool, 10> low_confidence{};  // n < 3
};

// Training trials are excluded; missing metrics reduce that metric's n.
std::vector<SubjectStats> aggregate(const std::vector<TrialMetrics>& trials);

}  // namespace tgrasp
