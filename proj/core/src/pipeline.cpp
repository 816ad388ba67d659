#include "tgrasp/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace tgrasp {

using nlohmann::json;

std::string PipelineConfig::canonical_text() const {
  std::ostringstream o;
  o << "seed = " << master_seed << "\n";
  o << "cohort = " << cohort.fine << "," << cohort.normal << "," << cohort.quick << "\n";
  o << "alpha = " << alpha << "\n";
  o << serialize_teleop(teleop) << serialize_population(population) << serialize_analysis(analysis);
  return o.str();
}

std::vector<TrialMetrics> simulate_cohort(const PipelineConfig& cfg, const CohortPlan& cohort,
                                          const std::function<void(const TrialLog&)>& sink) {
  struct Task {
    const SubjectPlan* subject;
    Experiment experiment;
  };
  std::vector<Task> tasks;
  for (const auto& s : cohort.subjects) {
    const Experiment second = s.first_experiment == Experiment::action ? Experiment::perception
                                                                       : Experiment::action;
    tasks.push_back({&s, s.first_experiment});
    tasks.push_back({&s, second});
  }

  std::vector<std::vector<TrialMetrics>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mu;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      const Task& task = tasks[i];
      try {
        const SubjectPlan& sp = *task.subject;
        SubjectAgent agent = make_subject(sp.agent_seed, sp.condition, cfg.population);
        agent.subject_id = sp.subject_id;
        const std::uint64_t plan_seed = task.experiment == Experiment::action
                                            ? sp.plan_seed_action
                                            : sp.plan_seed_perception;
        const ExperimentPlan plan = make_plan(sp.condition, task.experiment, plan_seed);
        TeleopConfig tc = cfg.teleop;
        tc.scaling.g_grasper = grasper_gain(sp.condition);
        std::vector<TrialMetrics>& out = results[i];
        out.reserve(plan.trials.size());
        for (const auto& slot : plan.trials) {
          const std::uint64_t tseed =
              derive_trial_seed(cfg.master_seed, sp.subject_id, task.experiment, slot.index);
          const TrialLog log = run_trial(agent, slot, task.experiment, tc, tseed);
          if (sink) sink(log);
          out.push_back(analyze_trial(log, cfg.analysis));
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mu);
        failure = e.what();
        failed.store(true);
        return;
      }
    }
  };

  int nw = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::thread::hardware_concurrency());
  if (nw < 1) nw = 1;
  std::vector<std::thread> threads;
  for (int k = 1; k < nw; ++k) threads.emplace_back(work);
  work();
  for (auto& th : threads) th.join();
  if (failed.load()) throw SimulationFault("simulate: " + failure);

  std::vector<TrialMetrics> flat;
  for (auto& r : results) flat.insert(flat.end(), r.begin(), r.end());
  return flat;
}

LongTable long_table(const std::vector<SubjectStats>& aggregates, Experiment experiment,
                     int metric_index, bool use_sd, bool log_transform) {
  LongTable t;
  t.metric = kMetricNames[static_cast<std::size_t>(metric_index)];
  t.statistic = use_sd ? "sd" : "mean";
  t.log_transform = log_transform;
  for (const auto& g : aggregates) {
    if (g.experiment != experiment) continue;
    const auto k = static_cast<std::size_t>(metric_index);
    const double v = use_sd ? g.sd[k] : g.mean[k];
    if (is_missing(v)) continue;
    t.rows.push_back({g.subject_id, g.condition, g.object_mm, v});
  }
  return t;
}

namespace {

struct ModelSpec {
  const char* name;
  Experiment experiment;
  int metric_index;
  bool use_sd;
  bool log_transform;
};

constexpr ModelSpec kModelSpecs[] = {
    {"action_mga_mean", Experiment::action, 0, false, false},
    {"action_mga_sd", Experiment::action, 0, true, false},
    {"perception_ps_mean", Experiment::perception, 2, false, false},
    {"perception_ps_sd", Experiment::perception, 2, true, false},
    {"action_reaction_time_mean", Experiment::action, 3, false, true},
    {"action_transport_time_mean", Experiment::action, 4, false, true},
    {"action_total_time_mean", Experiment::action, 5, false, true},
    {"perception_time_mean", Experiment::perception, 6, false, true},
    {"action_path_length_mean", Experiment::action, 7, false, false},
    {"action_mga_time_fraction_mean", Experiment::action, 1, false, false},
    {"action_peak_endpoint_speed_mean", Experiment::action, 8, false, false},
    {"action_peak_aperture_speed_mean", Experiment::action, 9, false, false},
};

std::optional<BartlettResult> try_bartlett(const LongTable& t, bool by_condition) {
  std::map<int, std::vector<double>> groups;
  for (const auto& r : t.rows) {
    const int key = by_condition ? static_cast<int>(r.condition)
                                 : static_cast<int>(std::lround(r.diameter_mm));
    double v = r.value;
    if (t.log_transform) {
      if (!(v > 0)) return std::nullopt;
      v = std::log(v);
    }
    groups[key].push_back(v);
  }
  std::vector<std::vector<double>> gs;
  for (auto& [k, v] : groups) gs.push_back(std::move(v));
  try {
    return bartlett(gs);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<ModelFit> fit_models(const std::vector<SubjectStats>& aggregates) {
  std::vector<ModelFit> out;
  for (const ModelSpec& spec : kModelSpecs) {
    ModelFit mf;
    mf.name = spec.name;
    mf.experiment = spec.experiment;
    mf.metric_index = spec.metric_index;
    mf.use_sd = spec.use_sd;
    mf.log_transform = spec.log_transform;
    const LongTable t =
        long_table(aggregates, spec.experiment, spec.metric_index, spec.use_sd, spec.log_transform);
    try {
      mf.fit = fit_lmm(t);
      mf.two_stage = two_stage_ols(t);
      mf.bartlett_by_condition = try_bartlett(t, true);
      mf.bartlett_by_object = try_bartlett(t, false);
      mf.ok = true;
    } catch (const std::exception& e) {
      mf.ok = false;
      mf.error = e.what();
    }
    out.push_back(std::move(mf));
  }
  return out;
}

TransparencyVerdict verdict_from_models(const std::vector<ModelFit>& models, double alpha) {
  const ModelFit *am = nullptr, *as = nullptr, *pm = nullptr, *ps = nullptr;
  for (const auto& m : models) {
    if (m.name == "action_mga_mean") am = &m;
    if (m.name == "action_mga_sd") as = &m;
    if (m.name == "perception_ps_mean") pm = &m;
    if (m.name == "perception_ps_sd") ps = &m;
  }
  if (!am || !as || !pm || !ps || !am->ok || !as->ok || !pm->ok || !ps->ok)
    throw ValidationError("verdict: the four transparency models must fit");
  return transparency_verdict(am->fit, as->fit, pm->fit, ps->fit, alpha);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult res;
  res.master_seed = cfg.master_seed;
  res.config_digest = config_hash(cfg.canonical_text());
  res.cohort = make_cohort(cfg.master_seed, cfg.cohort);
  res.trial_metrics = simulate_cohort(cfg, res.cohort);
  res.n_trials = static_cast<int>(res.trial_metrics.size());
  for (const auto& m : res.trial_metrics) {
    if (!m.analyzable) {
      ++res.n_excluded;
      if (m.exclude_reason == "infeasible trial") ++res.n_infeasible;
    }
  }
  res.aggregates = aggregate(res.trial_metrics);
  res.models = fit_models(res.aggregates);
  try {
    res.verdict = verdict_from_models(res.models, cfg.alpha);
  } catch (const std::exception&) {
    res.verdict = std::nullopt;
  }
  return res;
}

namespace {

json slope_json(const SlopeInfo& s) {
  return {{"estimate", s.estimate}, {"se", s.se},   {"t", s.t},
          {"df", s.df},             {"p_two", s.p_two}};
}

json fit_json(const FitResult& f) {
  json j;
  j["converged"] = f.converged;
  j["n_rows"] = f.n_rows;
  j["n_subjects"] = f.n_subjects;
  j["log_transform"] = f.log_transform;
  j["center_mm"] = f.center_mm;
  json coef = json::array();
  for (std::size_t i = 0; i < 6; ++i)
    coef.push_back({{"name", f.coef_names[i]}, {"estimate", f.beta[i]}, {"se", f.se[i]}});
  j["coefficients"] = coef;
  j["sigma2_subject"] = f.sigma2_u;
  j["sigma2_residual"] = f.sigma2_eps;
  j["lambda"] = f.lambda;
  j["boundary"] = f.boundary;
  j["reml_objective"] = f.reml_objective;
  j["reml_gradient"] = f.reml_gradient;
  const char* conds[3] = {"fine", "normal", "quick"};
  for (int c = 0; c < 3; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    j["slopes"][conds[c]] = slope_json(f.slopes[ci]);
    j["adjusted_means"][conds[c]] = {{"estimate", f.adjusted[ci].estimate},
                                     {"se", f.adjusted[ci].se},
                                     {"df", f.adjusted[ci].df},
                                     {"ci_lo", f.adjusted[ci].ci_lo},
                                     {"ci_hi", f.adjusted[ci].ci_hi}};
  }
  auto fj = [](const OmnibusF& o) {
    return json{{"F", o.F}, {"df1", o.df1}, {"df2", o.df2}, {"p", o.p}};
  };
  j["F_condition"] = fj(f.f_condition);
  j["F_diameter"] = fj(f.f_diameter);
  j["F_interaction"] = fj(f.f_interaction);
  return j;
}

std::string fmtcsv(double v) {
  if (std::isnan(v)) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void write_report(const fs::path& out_dir, const PipelineConfig& cfg, const PipelineResult& res) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir / "plots");

  json j;
  j["version"] = kVersion;
  j["config_hash"] = res.config_digest;
  j["master_seed"] = res.master_seed;
  j["alpha"] = cfg.alpha;
  j["cohort"] = {{"fine", cfg.cohort.fine},
                 {"normal", cfg.cohort.normal},
                 {"quick", cfg.cohort.quick},
                 {"subjects", res.cohort.subjects.size()}};
  j["trials"] = {{"total", res.n_trials},
                 {"excluded", res.n_excluded},
                 {"infeasible", res.n_infeasible}};

  for (const auto& m : res.models) {
    json mj;
    mj["ok"] = m.ok;
    if (!m.ok) {
      mj["error"] = m.error;
    } else {
      mj["fit"] = fit_json(m.fit);
      const char* conds[3] = {"fine", "normal", "quick"};
      for (int c = 0; c < 3; ++c) {
        const auto& ts = m.two_stage.by_condition[static_cast<std::size_t>(c)];
        mj["two_stage"][conds[c]] = {{"n", ts.n_subjects},
                                     {"mean_slope", ts.mean_slope},
                                     {"sd_slope", ts.sd_slope},
                                     {"t", ts.t},
                                     {"df", ts.df},
                                     {"p_two", ts.p_two}};
      }
      if (m.bartlett_by_condition)
        mj["bartlett_by_condition"] = {{"statistic", m.bartlett_by_condition->statistic},
                                       {"df", m.bartlett_by_condition->df},
                                       {"p", m.bartlett_by_condition->p}};
      if (m.bartlett_by_object)
        mj["bartlett_by_object"] = {{"statistic", m.bartlett_by_object->statistic},
                                    {"df", m.bartlett_by_object->df},
                                    {"p", m.bartlett_by_object->p}};
    }
    j["models"][m.name] = mj;
  }

  if (res.verdict) {
    const char* conds[3] = {"fine", "normal", "quick"};
    for (int c = 0; c < 3; ++c) {
      const auto& v = res.verdict->by_condition[static_cast<std::size_t>(c)];
      j["verdict"][conds[c]] = {{"action_mean_ok", v.action_mean_ok},
                                {"action_sd_weber_violated", v.action_sd_weber_violated},
                                {"perception_mean_ok", v.perception_mean_ok},
                                {"perception_sd_weber_obeyed", v.perception_sd_weber_obeyed},
                                {"transparent", v.transparent},
                                {"action_mean_p", v.action_mean_p},
                                {"action_sd_p_two", v.action_sd_p_two},
                                {"action_sd_p_neg", v.action_sd_p_neg},
                                {"perception_mean_p", v.perception_mean_p},
                                {"perception_sd_p", v.perception_sd_p}};
    }
  }

  {
    std::ofstream out(out_dir / "report.json");
    out << j.dump(2) << "\n";
  }

  // plot data. Figure 6/7 mirrors: per-subject points, regression lines,
  // the minimum required aperture and the per-condition ceiling.
  const MasterLimits limits;  // ceiling = g x master range
  auto ceiling_of = [&](Condition c) { return grasper_gain(c) * limits.gripper_range; };

  auto write_points = [&](const fs::path& path, int metric_index, bool use_sd) {
    std::ofstream out(path);
    out << "panel,condition,subject,object_mm,value,ceiling\n";
    for (const auto& g : res.aggregates) {
      const auto k = static_cast<std::size_t>(metric_index);
      const double v = use_sd ? g.sd[k] : g.mean[k];
      if (is_missing(v)) continue;
      out << kMetricNames[k] << "_" << (use_sd ? "sd" : "mean") << "," << to_string(g.condition)
          << "," << g.subject_id << "," << fmtcsv(g.object_mm) << "," << fmtcsv(v) << ","
          << fmtcsv(ceiling_of(g.condition)) << "\n";
    }
  };
  write_points(out_dir / "plots" / "fig6_points.csv", 0, false);   // action mean MGA
  write_points(out_dir / "plots" / "fig7_points.csv", 0, true);    // action SD MGA
  {
    // append the perception panels
    std::ofstream m6(out_dir / "plots" / "fig6_points.csv", std::ios::app);
    std::ofstream m7(out_dir / "plots" / "fig7_points.csv", std::ios::app);
    for (const auto& g : res.aggregates) {
      if (g.experiment != Experiment::perception) continue;
      if (!is_missing(g.mean[2]))
        m6 << "ps_mean," << to_string(g.condition) << "," << g.subject_id << ","
           << fmtcsv(g.object_mm) << "," << fmtcsv(g.mean[2]) << ","
           << fmtcsv(ceiling_of(g.condition)) << "\n";
      if (!is_missing(g.sd[2]))
        m7 << "ps_sd," << to_string(g.condition) << "," << g.subject_id << ","
           << fmtcsv(g.object_mm) << "," << fmtcsv(g.sd[2]) << ","
           << fmtcsv(ceiling_of(g.condition)) << "\n";
    }
  }

  {
    std::ofstream out(out_dir / "plots" / "regression_lines.csv");
    out << "model,condition,adjusted_mean,slope,center_mm,ceiling\n";
    const char* conds[3] = {"fine", "normal", "quick"};
    for (const auto& m : res.models) {
      if (!m.ok) continue;
      for (int c = 0; c < 3; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        out << m.name << "," << conds[c] << "," << fmtcsv(m.fit.adjusted[ci].estimate) << ","
            << fmtcsv(m.fit.slopes[ci].estimate) << "," << fmtcsv(m.fit.center_mm) << ","
            << fmtcsv(ceiling_of(static_cast<Condition>(c))) << "\n";
      }
    }
  }

  {
    std::ofstream out(out_dir / "plots" / "required_aperture.csv");
    out << "object_mm,required_angle_rad\n";
    for (double d : kObjectSetMm)
      out << fmtcsv(d) << "," << fmtcsv(aperture_for_diameter(mm_to_m(d), cfg.population.jaw_length))
          << "\n";
  }

  auto write_metric_panel = [&](const fs::path& path, std::initializer_list<int> metric_ids) {
    std::ofstream out(path);
    out << "metric,condition,subject,object_mm,value,ceiling\n";
    for (const auto& g : res.aggregates)
      for (int k : metric_ids) {
        const auto ki = static_cast<std::size_t>(k);
        if (is_missing(g.mean[ki])) continue;
        out << kMetricNames[ki] << "," << to_string(g.condition) << "," << g.subject_id << ","
            << fmtcsv(g.object_mm) << "," << fmtcsv(g.mean[ki]) << ","
            << fmtcsv(ceiling_of(g.condition)) << "\n";
      }
  };
  write_metric_panel(out_dir / "plots" / "fig8_timing.csv", {3, 4, 5, 6});
  write_metric_panel(out_dir / "plots" / "fig9_kinematics.csv", {7, 1, 8, 9});

  {
    std::ofstream out(out_dir / "plots" / "qq_residuals.csv");
    out << "model,theoretical,empirical\n";
    for (const auto& m : res.models) {
      if (!m.ok) continue;
      for (const QQPoint& p : qq_residuals(m.fit))
        out << m.name << "," << fmtcsv(p.theoretical) << "," << fmtcsv(p.empirical) << "\n";
    }
  }
}

}  // namespace tgrasp
