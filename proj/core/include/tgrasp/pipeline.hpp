#pragma once

#include <functional>
#include <optional>

#include "tgrasp/io.hpp"
#include "tgrasp/stats.hpp"

namespace tgrasp {

struct PipelineConfig {
  std::uint64_t master_seed = 1;
  CohortSizes cohort;
  PopulationParams population;
  TeleopConfig teleop;       // scaling.g_grasper is overridden per condition
  AnalysisConfig analysis;
  double alpha = 0.05;
  int workers = 0;           // 0 = hardware concurrency

  std::string canonical_text() const;  // for config hashing
};

// One fitted model of the report: a per-subject x object statistic
// regressed on condition x diameter with a subject random intercept.
struct ModelFit {
  std::string name;        // e.g. "action_mga_mean"
  Experiment experiment = Experiment::action;
  int metric_index = 0;
  bool use_sd = false;
  bool log_transform = false;
  bool ok = false;
  std::string error;
  FitResult fit;
  TwoStageResult two_stage;
  std::optional<BartlettResult> bartlett_by_condition, bartlett_by_object;
};

struct PipelineResult {
  std::uint64_t master_seed = 0;
  std::uint64_t config_digest = 0;
  CohortPlan cohort;
  std::vector<TrialMetrics> trial_metrics;
  std::vector<SubjectStats> aggregates;
  std::vector<ModelFit> models;
  std::optional<TransparencyVerdict> verdict;
  int n_trials = 0, n_excluded = 0, n_infeasible = 0;
};

// Simulate every trial of the cohort, fanning out across workers with
// per-trial seeds so the result is independent of the worker count. The
// sink, when given, receives every log (called from worker threads,
// distinct trials only).
std::vector<TrialMetrics> simulate_cohort(const PipelineConfig& cfg, const CohortPlan& cohort,
                                          const std::function<void(const TrialLog&)>& sink = {});

LongTable long_table(const std::vector<SubjectStats>& aggregates, Experiment experiment,
                     int metric_index, bool use_sd, bool log_transform);

// Fits the full model set of the report: means and SDs of MGA and PS,
// the log-transformed timing metrics, and the transport/grasp kinematics.
std::vector<ModelFit> fit_models(const std::vector<SubjectStats>& aggregates);

TransparencyVerdict verdict_from_models(const std::vector<ModelFit>& models, double alpha);

PipelineResult run_pipeline(const PipelineConfig& cfg);

// report.json plus plot-ready CSVs under <out_dir>/plots.
void write_report(const fs::path& out_dir, const PipelineConfig& cfg, const PipelineResult& res);

}  // namespace tgrasp
