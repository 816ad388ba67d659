#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tgrasp/agents.hpp"
#include "tgrasp/metrics.hpp"
#include "tgrasp/plan.hpp"
#include "tgrasp/teleop.hpp"

namespace tgrasp {

namespace fs = std::filesystem;

// ---- plan / cohort files (key = value header + CSV-style table) ------

void write_plan(const fs::path& path, const ExperimentPlan& plan);
ExperimentPlan read_plan(const fs::path& path);

void write_cohort(const fs::path& path, const CohortPlan& cohort);
CohortPlan read_cohort(const fs::path& path);

// ---- trial logs -------------------------------------------------------

// Writes <base>.csv (header line, then t,x,y,z,aperture,master_aperture,
// event rows in SI units) and a <base>.meta sidecar with the metadata and
// full-precision event times.
void write_trial_log(const fs::path& base, const TrialLog& log);
TrialLog read_trial_log(const fs::path& csv_path);

// ---- metrics tables ---------------------------------------------------

void write_trial_metrics_csv(const fs::path& path, const std::vector<TrialMetrics>& rows);
std::vector<TrialMetrics> read_trial_metrics_csv(const fs::path& path);

void write_aggregate_csv(const fs::path& path, const std::vector<SubjectStats>& rows);
std::vector<SubjectStats> read_aggregate_csv(const fs::path& path);

// ---- key = value configuration files ----------------------------------

using KVMap = std::map<std::string, std::string>;

KVMap parse_kv_text(const std::string& text);
KVMap parse_kv_file(const fs::path& path);

double kv_double(const KVMap& kv, const std::string& key, double fallback);
int kv_int(const KVMap& kv, const std::string& key, int fallback);
std::string kv_str(const KVMap& kv, const std::string& key, const std::string& fallback);

// Population parameter file ("agents.*" keys) and simulator config
// ("arm.*", "gains.*", "channel.*", "timing.*", "scaling.*" keys).
void apply_population(const KVMap& kv, PopulationParams& pop);
std::string serialize_population(const PopulationParams& pop);
void apply_teleop(const KVMap& kv, TeleopConfig& cfg);
std::string serialize_teleop(const TeleopConfig& cfg);
void apply_analysis(const KVMap& kv, AnalysisConfig& cfg);
std::string serialize_analysis(const AnalysisConfig& cfg);

// FNV-1a hash of a canonical serialization; stamped into reports so a
// rerun can prove it used the same configuration.
std::uint64_t config_hash(const std::string& canonical_text);

}  // namespace tgrasp
