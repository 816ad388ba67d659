#include "tgrasp/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tgrasp {

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_u64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%" PRIu64, v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io: cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("io: cannot read " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s) {
  if (s.empty()) return kMissing;
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

// ---- plans -----------------------------------------------------------

void write_plan(const fs::path& path, const ExperimentPlan& plan) {
  auto out = open_out(path);
  out << "# tgrasp-plan v1\n";
  out << "condition = " << to_string(plan.condition) << "\n";
  out << "experiment = " << to_string(plan.experiment) << "\n";
  out << "seed = " << fmt_u64(plan.seed) << "\n";
  out << "trials = " << plan.trials.size() << "\n";
  out << "# trial,object_mm,is_training\n";
  for (const auto& t : plan.trials)
    out << t.index << "," << fmt(t.object.diameter_mm) << "," << (t.is_training ? 1 : 0) << "\n";
}

ExperimentPlan read_plan(const fs::path& path) {
  auto in = open_in(path);
  ExperimentPlan plan;
  plan.trials.clear();
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key == "condition") plan.condition = condition_from_string(val);
      else if (key == "experiment") plan.experiment = experiment_from_string(val);
      else if (key == "seed") plan.seed = std::strtoull(val.c_str(), nullptr, 10);
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 3) throw ValidationError("plan: bad trial row: " + line);
    TrialSlot slot;
    slot.index = std::atoi(f[0].c_str());
    slot.object.diameter_mm = parse_double(f[1]);
    slot.is_training = f[2] == "1";
    plan.trials.push_back(slot);
  }
  return plan;
}

void write_cohort(const fs::path& path, const CohortPlan& cohort) {
  auto out = open_out(path);
  out << "# tgrasp-cohort v1\n";
  out << "seed = " << fmt_u64(cohort.seed) << "\n";
  out << "sizes = " << cohort.sizes.fine << "," << cohort.sizes.normal << ","
      << cohort.sizes.quick << "\n";
  out << "# subject,condition,first_experiment,agent_seed,plan_seed_action,plan_seed_perception\n";
  for (const auto& s : cohort.subjects)
    out << s.subject_id << "," << to_string(s.condition) << "," << to_string(s.first_experiment)
        << "," << fmt_u64(s.agent_seed) << "," << fmt_u64(s.plan_seed_action) << ","
        << fmt_u64(s.plan_seed_perception) << "\n";
}

CohortPlan read_cohort(const fs::path& path) {
  auto in = open_in(path);
  CohortPlan cohort;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key == "seed") cohort.seed = std::strtoull(val.c_str(), nullptr, 10);
      else if (key == "sizes") {
        const auto f = split(val, ',');
        if (f.size() == 3) {
          cohort.sizes.fine = std::atoi(f[0].c_str());
          cohort.sizes.normal = std::atoi(f[1].c_str());
          cohort.sizes.quick = std::atoi(f[2].c_str());
        }
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) throw ValidationError("cohort: bad subject row: " + line);
    SubjectPlan s;
    s.subject_id = f[0];
    s.condition = condition_from_string(f[1]);
    s.first_experiment = experiment_from_string(f[2]);
    s.agent_seed = std::strtoull(f[3].c_str(), nullptr, 10);
    s.plan_seed_action = std::strtoull(f[4].c_str(), nullptr, 10);
    s.plan_seed_perception = std::strtoull(f[5].c_str(), nullptr, 10);
    cohort.subjects.push_back(std::move(s));
  }
  return cohort;
}

// ---- trial logs --------------------------------------------------------

void write_trial_log(const fs::path& base, const TrialLog& log) {
  fs::path csv = base;
  csv += ".csv";
  fs::path meta = base;
  meta += ".meta";

  // events attached to the nearest sample row for readability; the
  // sidecar keeps full precision
  std::map<std::size_t, std::string> row_events;
  for (const auto& [name, time] : log.events) {
    if (time < 0 || log.t.empty()) continue;
    const double dt = log.t.size() > 1 ? log.t[1] - log.t[0] : 1e-3;
    std::size_t idx = static_cast<std::size_t>(std::llround(time / dt));
    if (idx >= log.t.size()) idx = log.t.size() - 1;
    auto& slot = row_events[idx];
    if (!slot.empty()) slot += ";";
    slot += name;
  }

  auto out = open_out(csv);
  out << "# tgrasp-triallog v1\n";
  out << "t,x,y,z,aperture,master_aperture,event\n";
  for (std::size_t i = 0; i < log.t.size(); ++i) {
    out << fmt(log.t[i], "%.3f") << "," << fmt(log.x[i]) << "," << fmt(log.y[i]) << ","
        << fmt(log.z[i]) << "," << fmt(log.aperture[i]) << "," << fmt(log.master_aperture[i])
        << ",";
    const auto it = row_events.find(i);
    if (it != row_events.end()) out << it->second;
    out << "\n";
  }

  const TrialMeta& m = log.meta;
  auto mo = open_out(meta);
  mo << "# tgrasp-trialmeta v1\n";
  mo << "subject = " << m.subject_id << "\n";
  mo << "condition = " << to_string(m.condition) << "\n";
  mo << "experiment = " << to_string(m.experiment) << "\n";
  mo << "trial = " << m.trial_index << "\n";
  mo << "object_mm = " << fmt(m.object_mm) << "\n";
  mo << "is_training = " << (m.is_training ? 1 : 0) << "\n";
  mo << "seed = " << fmt_u64(m.seed) << "\n";
  mo << "feasible = " << (m.feasible ? 1 : 0) << "\n";
  mo << "ceiling = " << fmt(m.ceiling, "%.17g") << "\n";
  mo << "required_angle = " << fmt(m.required_angle, "%.17g") << "\n";
  mo << "intended_mga = " << fmt(m.intended_mga, "%.17g") << "\n";
  mo << "intended_ps = " << fmt(m.intended_ps, "%.17g") << "\n";
  mo << "jaw_length = " << fmt(m.jaw_length, "%.17g") << "\n";
  mo << "at_limit_samples = " << m.at_limit_samples << "\n";
  mo << "unreachable_samples = " << m.unreachable_samples << "\n";
  mo << "start_pos = " << fmt(m.start_pos[0], "%.17g") << "," << fmt(m.start_pos[1], "%.17g")
     << "," << fmt(m.start_pos[2], "%.17g") << "\n";
  mo << "object_pos = " << fmt(m.object_pos[0], "%.17g") << "," << fmt(m.object_pos[1], "%.17g")
     << "," << fmt(m.object_pos[2], "%.17g") << "\n";
  mo << "version = " << m.software_version << "\n";
  for (const auto& [name, time] : log.events)
    mo << "event." << name << " = " << fmt(time, "%.17g") << "\n";
}

TrialLog read_trial_log(const fs::path& csv_path) {
  TrialLog log;
  {
    auto in = open_in(csv_path);
    std::string line;
    bool header_done = false;
    while (std::getline(in, line)) {
      line = trim(line);
      if (line.empty() || line[0] == '#') continue;
      if (!header_done) {
        header_done = true;  // column header
        continue;
      }
      const auto f = split(line, ',');
      if (f.size() != 7) throw ValidationError("triallog: bad row: " + line);
      log.t.push_back(parse_double(f[0]));
      log.x.push_back(parse_double(f[1]));
      log.y.push_back(parse_double(f[2]));
      log.z.push_back(parse_double(f[3]));
      log.aperture.push_back(parse_double(f[4]));
      log.master_aperture.push_back(parse_double(f[5]));
    }
  }
  fs::path meta = csv_path;
  meta.replace_extension(".meta");
  if (fs::exists(meta)) {
    const KVMap kv = parse_kv_file(meta);
    TrialMeta& m = log.meta;
    m.subject_id = kv_str(kv, "subject", "");
    m.condition = condition_from_string(kv_str(kv, "condition", "normal"));
    m.experiment = experiment_from_string(kv_str(kv, "experiment", "action"));
    m.trial_index = kv_int(kv, "trial", 0);
    m.object_mm = kv_double(kv, "object_mm", 8);
    m.is_training = kv_int(kv, "is_training", 0) != 0;
    m.seed = std::strtoull(kv_str(kv, "seed", "0").c_str(), nullptr, 10);
    m.feasible = kv_int(kv, "feasible", 1) != 0;
    m.ceiling = kv_double(kv, "ceiling", 0);
    m.required_angle = kv_double(kv, "required_angle", 0);
    m.intended_mga = kv_double(kv, "intended_mga", 0);
    m.intended_ps = kv_double(kv, "intended_ps", 0);
    m.jaw_length = kv_double(kv, "jaw_length", 0.01);
    m.at_limit_samples = kv_int(kv, "at_limit_samples", 0);
    m.unreachable_samples = kv_int(kv, "unreachable_samples", 0);
    auto read_vec = [&](const std::string& key, Vec3& v) {
      const auto f = split(kv_str(kv, key, "0,0,0"), ',');
      if (f.size() == 3) v = {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])};
    };
    read_vec("start_pos", m.start_pos);
    read_vec("object_pos", m.object_pos);
    m.software_version = kv_str(kv, "version", kVersion);
    for (const auto& [key, val] : kv)
      if (key.rfind("event.", 0) == 0) log.add_event(key.substr(6), parse_double(val));
  }
  return log;
}

// ---- metrics tables ----------------------------------------------------

namespace {
std::string cell(double v) { return is_missing(v) ? "" : fmt(v); }
}  // namespace

void write_trial_metrics_csv(const fs::path& path, const std::vector<TrialMetrics>& rows) {
  auto out = open_out(path);
  out << "# tgrasp-metrics v1\n";
  out << "subject,condition,experiment,trial,object_mm,is_training,analyzable,exclude_reason";
  for (const char* name : kMetricNames) out << "," << name;
  out << ",truth_intended_mga,truth_intended_ps,truth_onset,truth_mga_time,truth_ceiling\n";
  for (const auto& m : rows) {
    out << m.subject_id << "," << to_string(m.condition) << "," << to_string(m.experiment) << ","
        << m.trial_index << "," << fmt(m.object_mm) << "," << (m.is_training ? 1 : 0) << ","
        << (m.analyzable ? 1 : 0) << "," << m.exclude_reason;
    for (int k = 0; k < 10; ++k) out << "," << cell(metric_value(m, k));
    out << "," << cell(m.truth_intended_mga) << "," << cell(m.truth_intended_ps) << ","
        << cell(m.truth_onset) << "," << cell(m.truth_mga_time) << "," << cell(m.truth_ceiling)
        << "\n";
  }
}

std::vector<TrialMetrics> read_trial_metrics_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<TrialMetrics> rows;
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_done) {
      header_done = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 23) throw ValidationError("metrics: bad row: " + line);
    TrialMetrics m;
    m.subject_id = f[0];
    m.condition = condition_from_string(f[1]);
    m.experiment = experiment_from_string(f[2]);
    m.trial_index = std::atoi(f[3].c_str());
    m.object_mm = parse_double(f[4]);
    m.is_training = f[5] == "1";
    m.analyzable = f[6] == "1";
    m.exclude_reason = f[7];
    double* fields[10] = {&m.mga,        &m.mga_time_fraction, &m.ps,
                          &m.reaction_time, &m.transport_time, &m.total_time,
                          &m.perception_time, &m.path_length,  &m.peak_endpoint_speed,
                          &m.peak_aperture_speed};
    for (int k = 0; k < 10; ++k) *fields[k] = parse_double(f[static_cast<std::size_t>(8 + k)]);
    m.truth_intended_mga = parse_double(f[18]);
    m.truth_intended_ps = parse_double(f[19]);
    m.truth_onset = parse_double(f[20]);
    m.truth_mga_time = parse_double(f[21]);
    m.truth_ceiling = parse_double(f[22]);
    rows.push_back(std::move(m));
  }
  return rows;
}

void write_aggregate_csv(const fs::path& path, const std::vector<SubjectStats>& rows) {
  auto out = open_out(path);
  out << "# tgrasp-aggregate v1\n";
  out << "subject,condition,experiment,object_mm,metric,n,mean,sd,low_confidence\n";
  for (const auto& r : rows)
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
      if (r.n[k] == 0) continue;
      out << r.subject_id << "," << to_string(r.condition) << "," << to_string(r.experiment)
          << "," << fmt(r.object_mm) << "," << kMetricNames[k] << "," << r.n[k] << ","
          << cell(r.mean[k]) << "," << cell(r.sd[k]) << "," << (r.low_confidence[k] ? 1 : 0)
          << "\n";
    }
}

std::vector<SubjectStats> read_aggregate_csv(const fs::path& path) {
  auto in = open_in(path);
  std::map<std::tuple<std::string, std::string, double>, SubjectStats> groups;
  std::string line;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_done) {
      header_done = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 9) throw ValidationError("aggregate: bad row: " + line);
    const auto key = std::make_tuple(f[0], f[2], parse_double(f[3]));
    auto& g = groups[key];
    if (g.subject_id.empty()) {
      g.subject_id = f[0];
      g.condition = condition_from_string(f[1]);
      g.experiment = experiment_from_string(f[2]);
      g.object_mm = parse_double(f[3]);
      g.mean.fill(kMissing);
      g.sd.fill(kMissing);
    }
    const std::string metric = f[4];
    for (std::size_t k = 0; k < kMetricNames.size(); ++k)
      if (metric == kMetricNames[k]) {
        g.n[k] = std::atoi(f[5].c_str());
        g.mean[k] = parse_double(f[6]);
        g.sd[k] = parse_double(f[7]);
        g.low_confidence[k] = f[8] == "1";
      }
  }
  std::vector<SubjectStats> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(std::move(g));
  return out;
}

// ---- key = value -------------------------------------------------------

KVMap parse_kv_text(const std::string& text) {
  KVMap kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KVMap parse_kv_file(const fs::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

double kv_double(const KVMap& kv, const std::string& key, double fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_double(it->second);
}
int kv_int(const KVMap& kv, const std::string& key, int fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : std::atoi(it->second.c_str());
}
std::string kv_str(const KVMap& kv, const std::string& key, const std::string& fallback) {
  const auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

void apply_population(const KVMap& kv, PopulationParams& p) {
  auto g = [&](const char* k, double& v) { v = kv_double(kv, k, v); };
  g("agents.reaction_mean", p.reaction_mean);
  g("agents.reaction_mean_jitter", p.reaction_mean_jitter);
  g("agents.reaction_sd", p.reaction_sd);
  g("agents.reaction_sd_jitter", p.reaction_sd_jitter);
  g("agents.transport_mean", p.transport_mean);
  g("agents.transport_mean_jitter", p.transport_mean_jitter);
  g("agents.transport_sd", p.transport_sd);
  g("agents.transport_sd_jitter", p.transport_sd_jitter);
  g("agents.mga_intercept", p.mga_intercept);
  g("agents.mga_intercept_jitter", p.mga_intercept_jitter);
  g("agents.mga_slope", p.mga_slope);
  g("agents.mga_slope_jitter", p.mga_slope_jitter);
  g("agents.mga_sd", p.mga_sd);
  g("agents.mga_sd_jitter", p.mga_sd_jitter);
  g("agents.mga_timing_fraction", p.mga_timing_fraction);
  g("agents.mga_timing_fraction_jitter", p.mga_timing_fraction_jitter);
  g("agents.ps_bias_mm", p.ps_bias_mm);
  g("agents.ps_bias_jitter", p.ps_bias_jitter);
  g("agents.weber_fraction", p.weber_fraction);
  g("agents.weber_fraction_jitter", p.weber_fraction_jitter);
  g("agents.jaw_length", p.jaw_length);
  g("agents.mga_guard", p.mga_guard);
  g("agents.ps_guard", p.ps_guard);
  g("agents.headroom_sd_frac", p.headroom_sd_frac);
  g("agents.slam_prob", p.slam_prob);
  g("agents.late_peak_fraction", p.late_peak_fraction);
  g("agents.p_during_reach", p.phenotype_probs[0]);
  g("agents.p_pre_opener", p.phenotype_probs[1]);
  g("agents.p_late_opener", p.phenotype_probs[2]);
}

std::string serialize_population(const PopulationParams& p) {
  std::ostringstream o;
  o << "# tgrasp population parameters (SI units; tip openings in mm)\n";
  auto w = [&](const char* k, double v) { o << k << " = " << fmt(v, "%.17g") << "\n"; };
  w("agents.reaction_mean", p.reaction_mean);
  w("agents.reaction_mean_jitter", p.reaction_mean_jitter);
  w("agents.reaction_sd", p.reaction_sd);
  w("agents.reaction_sd_jitter", p.reaction_sd_jitter);
  w("agents.transport_mean", p.transport_mean);
  w("agents.transport_mean_jitter", p.transport_mean_jitter);
  w("agents.transport_sd", p.transport_sd);
  w("agents.transport_sd_jitter", p.transport_sd_jitter);
  w("agents.mga_intercept", p.mga_intercept);
  w("agents.mga_intercept_jitter", p.mga_intercept_jitter);
  w("agents.mga_slope", p.mga_slope);
  w("agents.mga_slope_jitter", p.mga_slope_jitter);
  w("agents.mga_sd", p.mga_sd);
  w("agents.mga_sd_jitter", p.mga_sd_jitter);
  w("agents.mga_timing_fraction", p.mga_timing_fraction);
  w("agents.mga_timing_fraction_jitter", p.mga_timing_fraction_jitter);
  w("agents.ps_bias_mm", p.ps_bias_mm);
  w("agents.ps_bias_jitter", p.ps_bias_jitter);
  w("agents.weber_fraction", p.weber_fraction);
  w("agents.weber_fraction_jitter", p.weber_fraction_jitter);
  w("agents.jaw_length", p.jaw_length);
  w("agents.mga_guard", p.mga_guard);
  w("agents.ps_guard", p.ps_guard);
  w("agents.headroom_sd_frac", p.headroom_sd_frac);
  w("agents.slam_prob", p.slam_prob);
  w("agents.late_peak_fraction", p.late_peak_fraction);
  w("agents.p_during_reach", p.phenotype_probs[0]);
  w("agents.p_pre_opener", p.phenotype_probs[1]);
  w("agents.p_late_opener", p.phenotype_probs[2]);
  return o.str();
}

void apply_teleop(const KVMap& kv, TeleopConfig& c) {
  auto g = [&](const char* k, double& v) { v = kv_double(kv, k, v); };
  g("scaling.g_cartesian", c.scaling.g_cartesian);
  g("scaling.g_orientation", c.scaling.g_orientation);
  g("scaling.g_grasper", c.scaling.g_grasper);
  g("limits.gripper_range", c.limits.gripper_range);
  g("limits.grip_span", c.limits.grip_span);
  g("channel.delay_mean", c.channel.delay_mean);
  g("channel.delay_jitter_sd", c.channel.delay_jitter_sd);
  g("channel.drop_prob", c.channel.drop_prob);
  for (int i = 0; i < 4; ++i) {
    const std::string suffix = std::to_string(i + 1);
    const auto gi = static_cast<std::size_t>(i);
    c.arm.inertia[gi] = kv_double(kv, "arm.inertia" + suffix, c.arm.inertia[gi]);
    c.arm.damping[gi] = kv_double(kv, "arm.damping" + suffix, c.arm.damping[gi]);
    c.gains.kp[gi] = kv_double(kv, "gains.kp" + suffix, c.gains.kp[gi]);
    c.gains.kd[gi] = kv_double(kv, "gains.kd" + suffix, c.gains.kd[gi]);
  }
  g("arm.tool_mass", c.arm.tool_mass);
  g("arm.gravity", c.arm.gravity);
  g("arm.gc_fidelity", c.arm.gc_fidelity);
  g("arm.q3_min", c.arm.q3_min);
  g("arm.q3_max", c.arm.q3_max);
  g("arm.q2_min", c.arm.q2_min);
  g("arm.q2_max", c.arm.q2_max);
  g("arm.qg_max", c.arm.qg_max);
  g("timing.ready", c.timing.ready);
  g("timing.reach_distance", c.timing.reach_distance);
  g("timing.lift_height", c.timing.lift_height);
  g("timing.lift_duration", c.timing.lift_duration);
  g("timing.capture_radius", c.timing.capture_radius);
  g("timing.squeeze", c.timing.squeeze);
}

std::string serialize_teleop(const TeleopConfig& c) {
  std::ostringstream o;
  o << "# tgrasp simulator configuration (SI units: m, rad, s, kg)\n";
  auto w = [&](const std::string& k, double v) { o << k << " = " << fmt(v, "%.17g") << "\n"; };
  w("scaling.g_cartesian", c.scaling.g_cartesian);
  w("scaling.g_orientation", c.scaling.g_orientation);
  w("scaling.g_grasper", c.scaling.g_grasper);
  w("limits.gripper_range", c.limits.gripper_range);
  w("limits.grip_span", c.limits.grip_span);
  w("channel.delay_mean", c.channel.delay_mean);
  w("channel.delay_jitter_sd", c.channel.delay_jitter_sd);
  w("channel.drop_prob", c.channel.drop_prob);
  for (int i = 0; i < 4; ++i) {
    const std::string s = std::to_string(i + 1);
    const auto gi = static_cast<std::size_t>(i);
    w("arm.inertia" + s, c.arm.inertia[gi]);
    w("arm.damping" + s, c.arm.damping[gi]);
    w("gains.kp" + s, c.gains.kp[gi]);
    w("gains.kd" + s, c.gains.kd[gi]);
  }
  w("arm.tool_mass", c.arm.tool_mass);
  w("arm.gravity", c.arm.gravity);
  w("arm.gc_fidelity", c.arm.gc_fidelity);
  w("arm.q3_min", c.arm.q3_min);
  w("arm.q3_max", c.arm.q3_max);
  w("arm.q2_min", c.arm.q2_min);
  w("arm.q2_max", c.arm.q2_max);
  w("arm.qg_max", c.arm.qg_max);
  w("timing.ready", c.timing.ready);
  w("timing.reach_distance", c.timing.reach_distance);
  w("timing.lift_height", c.timing.lift_height);
  w("timing.lift_duration", c.timing.lift_duration);
  w("timing.capture_radius", c.timing.capture_radius);
  w("timing.squeeze", c.timing.squeeze);
  return o.str();
}

void apply_analysis(const KVMap& kv, AnalysisConfig& c) {
  auto g = [&](const char* k, double& v) { v = kv_double(kv, k, v); };
  c.downsample = kv_int(kv, "analysis.downsample", c.downsample);
  c.filter_order = kv_int(kv, "analysis.filter_order", c.filter_order);
  g("analysis.filter_cutoff_hz", c.filter_cutoff_hz);
  g("analysis.onset_frac", c.onset_frac);
  g("analysis.onset_floor_frac", c.onset_floor_frac);
  g("analysis.onset_hold", c.onset_hold);
  g("analysis.end_frac", c.end_frac);
  g("analysis.capture_radius", c.capture_radius);
  g("analysis.lift_thresh", c.lift_thresh);
  g("analysis.hold_speed_thresh", c.hold_speed_thresh);
  g("analysis.hold_min_duration", c.hold_min_duration);
  g("analysis.min_peak_speed", c.min_peak_speed);
  g("analysis.max_exclusion_rate", c.max_exclusion_rate);
}

std::string serialize_analysis(const AnalysisConfig& c) {
  std::ostringstream o;
  o << "# tgrasp analysis configuration\n";
  auto w = [&](const char* k, double v) { o << k << " = " << fmt(v, "%.17g") << "\n"; };
  o << "analysis.downsample = " << c.downsample << "\n";
  o << "analysis.filter_order = " << c.filter_order << "\n";
  w("analysis.filter_cutoff_hz", c.filter_cutoff_hz);
  w("analysis.onset_frac", c.onset_frac);
  w("analysis.onset_floor_frac", c.onset_floor_frac);
  w("analysis.onset_hold", c.onset_hold);
  w("analysis.end_frac", c.end_frac);
  w("analysis.capture_radius", c.capture_radius);
  w("analysis.lift_thresh", c.lift_thresh);
  w("analysis.hold_speed_thresh", c.hold_speed_thresh);
  w("analysis.hold_min_duration", c.hold_min_duration);
  w("analysis.min_peak_speed", c.min_peak_speed);
  w("analysis.max_exclusion_rate", c.max_exclusion_rate);
  return o.str();
}

std::uint64_t config_hash(const std::string& canonical_text) {
  return hash_str(0, canonical_text.c_str());
}

}  // namespace tgrasp
