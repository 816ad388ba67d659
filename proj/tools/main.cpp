// tgrasp command line: plan generation, cohort simulation, analysis,
// model fitting, the transparency verdict and trial replay.
//
// Exit codes: 0 success, 2 validation error, 3 analysis exclusions over
// the configured bound, 4 fit failure.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "tgrasp/pipeline.hpp"

using namespace tgrasp;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitExclusions = 3;
constexpr int kExitFitFailure = 4;

struct CommonOpts {
  std::string config_file;
  std::string population_file;
};

// The config file, when given, overrides flag values.
void apply_files(const CommonOpts& opts, TeleopConfig* teleop, PopulationParams* pop,
                 AnalysisConfig* analysis) {
  if (!opts.population_file.empty() && pop)
    apply_population(parse_kv_file(opts.population_file), *pop);
  if (opts.config_file.empty()) return;
  const KVMap kv = parse_kv_file(opts.config_file);
  if (teleop) apply_teleop(kv, *teleop);
  if (pop) apply_population(kv, *pop);
  if (analysis) apply_analysis(kv, *analysis);
}

std::string log_basename(const std::string& subject, Experiment exp, int trial) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%s_T%03d", subject.c_str(), to_string(exp), trial);
  return buf;
}

int cmd_plan(std::uint64_t seed, const std::string& out_dir, const std::string& cohort_spec) {
  CohortSizes sizes;
  if (!cohort_spec.empty()) {
    if (std::sscanf(cohort_spec.c_str(), "%d,%d,%d", &sizes.fine, &sizes.normal, &sizes.quick) !=
        3)
      throw ValidationError("--cohort expects fine,normal,quick counts");
  }
  const CohortPlan cohort = make_cohort(seed, sizes);
  fs::create_directories(fs::path(out_dir) / "plans");
  write_cohort(fs::path(out_dir) / "cohort.txt", cohort);
  int files = 0;
  for (const auto& s : cohort.subjects)
    for (Experiment exp : {Experiment::action, Experiment::perception}) {
      const std::uint64_t plan_seed =
          exp == Experiment::action ? s.plan_seed_action : s.plan_seed_perception;
      const ExperimentPlan plan = make_plan(s.condition, exp, plan_seed);
      write_plan(fs::path(out_dir) / "plans" /
                     (s.subject_id + "_" + to_string(exp) + ".plan"),
                 plan);
      ++files;
    }
  std::fprintf(stderr, "wrote cohort.txt and %d plan files under %s\n", files, out_dir.c_str());
  return kExitOk;
}

int cmd_simulate(const std::string& cohort_file, const std::string& plans_dir,
                 const std::string& out_dir, std::uint64_t master_seed, int workers,
                 const std::string& only_subject, const CommonOpts& opts) {
  const CohortPlan cohort = read_cohort(cohort_file);
  TeleopConfig base;
  PopulationParams pop;
  apply_files(opts, &base, &pop, nullptr);
  fs::create_directories(out_dir);

  struct Task {
    const SubjectPlan* subject;
    Experiment experiment;
  };
  std::vector<Task> tasks;
  for (const auto& s : cohort.subjects) {
    if (!only_subject.empty() && s.subject_id != only_subject) continue;
    tasks.push_back({&s, Experiment::action});
    tasks.push_back({&s, Experiment::perception});
  }
  if (tasks.empty()) throw ValidationError("simulate: no matching subjects in cohort");

  std::atomic<std::size_t> next{0};
  std::atomic<int> n_trials{0}, n_infeasible{0}, n_clamped{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string err;

  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      try {
        const SubjectPlan& sp = *tasks[i].subject;
        const Experiment exp = tasks[i].experiment;
        const fs::path plan_path =
            fs::path(plans_dir) / (sp.subject_id + "_" + to_string(exp) + ".plan");
        const ExperimentPlan plan = read_plan(plan_path);
        const auto violations = validate_plan(plan);
        if (!violations.empty())
          throw ValidationError("invalid plan " + plan_path.string() + ": " + violations.front());
        SubjectAgent agent = make_subject(sp.agent_seed, sp.condition, pop);
        agent.subject_id = sp.subject_id;
        TeleopConfig cfg = base;
        cfg.scaling.g_grasper = grasper_gain(sp.condition);
        for (const auto& slot : plan.trials) {
          const std::uint64_t tseed =
              derive_trial_seed(master_seed, sp.subject_id, exp, slot.index);
          const TrialLog log = run_trial(agent, slot, exp, cfg, tseed);
          write_trial_log(fs::path(out_dir) / log_basename(sp.subject_id, exp, slot.index), log);
          n_trials.fetch_add(1);
          if (!log.meta.feasible) n_infeasible.fetch_add(1);
          if (log.meta.at_limit_samples > 0) n_clamped.fetch_add(1);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        err = e.what();
        failed.store(true);
        return;
      }
    }
  };
  int nw = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  if (nw < 1) nw = 1;
  std::vector<std::thread> threads;
  for (int k = 1; k < nw; ++k) threads.emplace_back(work);
  work();
  for (auto& th : threads) th.join();
  if (failed.load()) throw ValidationError("simulate: " + err);
  std::fprintf(stderr, "simulated %d trials (%d infeasible, %d with master-limit clamps)\n",
               n_trials.load(), n_infeasible.load(), n_clamped.load());
  return kExitOk;
}

int cmd_analyze(const std::string& logs_dir, const std::string& out_dir, const CommonOpts& opts) {
  AnalysisConfig acfg;
  apply_files(opts, nullptr, nullptr, &acfg);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(logs_dir))
    if (entry.path().extension() == ".csv") files.push_back(entry.path());
  if (files.empty()) throw ValidationError("analyze: no trial logs in " + logs_dir);
  std::sort(files.begin(), files.end());

  fs::create_directories(out_dir);
  std::vector<TrialMetrics> rows;
  std::ofstream excl(fs::path(out_dir) / "exclusions.txt");
  int excluded = 0;
  for (const auto& f : files) {
    TrialMetrics m;
    try {
      m = analyze_trial(read_trial_log(f), acfg);
    } catch (const std::exception& e) {
      excl << f.filename().string() << ": corrupt log skipped (" << e.what() << ")\n";
      ++excluded;
      continue;
    }
    if (!m.analyzable) {
      excl << f.filename().string() << ": " << m.exclude_reason << "\n";
      ++excluded;
    }
    rows.push_back(std::move(m));
  }
  write_trial_metrics_csv(fs::path(out_dir) / "trial_metrics.csv", rows);
  write_aggregate_csv(fs::path(out_dir) / "aggregate.csv", aggregate(rows));
  const double rate = static_cast<double>(excluded) / static_cast<double>(files.size());
  std::fprintf(stderr, "analyzed %zu logs, %d excluded (%.2f%%)\n", files.size(), excluded,
               100.0 * rate);
  return rate > acfg.max_exclusion_rate ? kExitExclusions : kExitOk;
}

json fit_to_json(const ModelFit& m) {
  json j;
  j["name"] = m.name;
  j["ok"] = m.ok;
  if (!m.ok) {
    j["error"] = m.error;
    return j;
  }
  json coef = json::array();
  for (std::size_t i = 0; i < 6; ++i)
    coef.push_back({{"name", m.fit.coef_names[i]},
                    {"estimate", m.fit.beta[i]},
                    {"se", m.fit.se[i]}});
  j["coefficients"] = coef;
  j["sigma2_subject"] = m.fit.sigma2_u;
  j["sigma2_residual"] = m.fit.sigma2_eps;
  j["boundary"] = m.fit.boundary;
  const char* conds[3] = {"fine", "normal", "quick"};
  for (int c = 0; c < 3; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    j["slopes"][conds[c]] = {{"estimate", m.fit.slopes[ci].estimate},
                             {"se", m.fit.slopes[ci].se},
                             {"t", m.fit.slopes[ci].t},
                             {"df", m.fit.slopes[ci].df},
                             {"p_two", m.fit.slopes[ci].p_two}};
    j["adjusted_means"][conds[c]] = {{"estimate", m.fit.adjusted[ci].estimate},
                                     {"ci_lo", m.fit.adjusted[ci].ci_lo},
                                     {"ci_hi", m.fit.adjusted[ci].ci_hi}};
    const auto& ts = m.two_stage.by_condition[ci];
    j["two_stage"][conds[c]] = {{"n", ts.n_subjects},
                                {"mean_slope", ts.mean_slope},
                                {"t", ts.t},
                                {"p_two", ts.p_two}};
  }
  if (m.bartlett_by_condition)
    j["bartlett_by_condition"] = {{"statistic", m.bartlett_by_condition->statistic},
                                  {"df", m.bartlett_by_condition->df},
                                  {"p", m.bartlett_by_condition->p}};
  return j;
}

int cmd_fit(const std::string& aggregate_file, const std::string& metric,
            const std::string& stat, const std::string& experiment, bool log_transform,
            const std::string& out_file) {
  const auto agg = read_aggregate_csv(aggregate_file);
  int metric_index = -1;
  for (std::size_t k = 0; k < kMetricNames.size(); ++k)
    if (metric == kMetricNames[k]) metric_index = static_cast<int>(k);
  if (metric_index < 0) throw ValidationError("unknown metric: " + metric);
  ModelFit mf;
  mf.name = experiment + "_" + metric + "_" + stat;
  const LongTable t = long_table(agg, experiment_from_string(experiment), metric_index,
                                 stat == "sd", log_transform);
  try {
    mf.fit = fit_lmm(t);
    mf.two_stage = two_stage_ols(t);
    mf.ok = true;
  } catch (const std::exception& e) {
    mf.ok = false;
    mf.error = e.what();
  }
  std::ofstream out(out_file);
  out << fit_to_json(mf).dump(2) << "\n";
  if (!mf.ok) {
    std::fprintf(stderr, "fit failed: %s\n", mf.error.c_str());
    return kExitFitFailure;
  }
  return kExitOk;
}

int cmd_verdict(const std::string& aggregate_file, const std::string& out_dir, double alpha) {
  PipelineResult res;
  res.aggregates = read_aggregate_csv(aggregate_file);
  if (res.aggregates.empty()) throw ValidationError("verdict: empty aggregate table");
  res.models = fit_models(res.aggregates);
  int failures = 0;
  for (const auto& m : res.models)
    if (!m.ok) {
      std::fprintf(stderr, "model %s failed: %s\n", m.name.c_str(), m.error.c_str());
      ++failures;
    }
  try {
    res.verdict = verdict_from_models(res.models, alpha);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "verdict unavailable: %s\n", e.what());
  }
  PipelineConfig cfg;
  cfg.alpha = alpha;
  write_report(out_dir, cfg, res);
  if (res.verdict) {
    const char* conds[3] = {"fine", "normal", "quick"};
    for (int c = 0; c < 3; ++c)
      std::printf("%s: %s\n", conds[c],
                  res.verdict->by_condition[static_cast<std::size_t>(c)].transparent
                      ? "transparent"
                      : "not transparent");
  }
  return res.verdict && failures == 0 ? kExitOk : kExitFitFailure;
}

int cmd_report(std::uint64_t seed, const std::string& out_dir, const std::string& cohort_spec,
               int workers, double alpha, bool keep_logs, const CommonOpts& opts) {
  PipelineConfig cfg;
  cfg.master_seed = seed;
  cfg.alpha = alpha;
  cfg.workers = workers;
  if (!cohort_spec.empty()) {
    if (std::sscanf(cohort_spec.c_str(), "%d,%d,%d", &cfg.cohort.fine, &cfg.cohort.normal,
                    &cfg.cohort.quick) != 3)
      throw ValidationError("--cohort expects fine,normal,quick counts");
  }
  apply_files(opts, &cfg.teleop, &cfg.population, &cfg.analysis);

  fs::create_directories(out_dir);
  PipelineResult res;
  if (keep_logs) {
    fs::create_directories(fs::path(out_dir) / "logs");
    res.master_seed = cfg.master_seed;
    res.config_digest = config_hash(cfg.canonical_text());
    res.cohort = make_cohort(cfg.master_seed, cfg.cohort);
    std::mutex io_mu;
    res.trial_metrics = simulate_cohort(cfg, res.cohort, [&](const TrialLog& log) {
      const fs::path base = fs::path(out_dir) / "logs" /
                            log_basename(log.meta.subject_id, log.meta.experiment,
                                         log.meta.trial_index);
      std::lock_guard<std::mutex> lock(io_mu);
      write_trial_log(base, log);
    });
    for (const auto& m : res.trial_metrics)
      if (!m.analyzable) ++res.n_excluded;
    res.n_trials = static_cast<int>(res.trial_metrics.size());
    res.aggregates = aggregate(res.trial_metrics);
    res.models = fit_models(res.aggregates);
    try {
      res.verdict = verdict_from_models(res.models, cfg.alpha);
    } catch (const std::exception&) {
    }
  } else {
    res = run_pipeline(cfg);
  }
  write_trial_metrics_csv(fs::path(out_dir) / "trial_metrics.csv", res.trial_metrics);
  write_aggregate_csv(fs::path(out_dir) / "aggregate.csv", res.aggregates);
  {
    std::ofstream cfgout(fs::path(out_dir) / "effective_config.txt");
    cfgout << cfg.canonical_text();
  }
  write_report(out_dir, cfg, res);
  if (res.verdict) {
    const char* conds[3] = {"fine", "normal", "quick"};
    for (int c = 0; c < 3; ++c)
      std::printf("%s: %s\n", conds[c],
                  res.verdict->by_condition[static_cast<std::size_t>(c)].transparent
                      ? "transparent"
                      : "not transparent");
  }
  bool all_ok = res.verdict.has_value();
  for (const auto& m : res.models) all_ok = all_ok && m.ok;
  return all_ok ? kExitOk : kExitFitFailure;
}

int cmd_replay(const std::string& log_file, const std::string& out_dir, const CommonOpts& opts) {
  AnalysisConfig acfg;
  apply_files(opts, nullptr, nullptr, &acfg);
  const TrialLog log = read_trial_log(log_file);
  const FilteredTrial ft = preprocess(log, acfg);
  const DetectedEvents ev = detect_events(ft, acfg);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "filtered.csv");
    out << "t,x,y,z,aperture,master_aperture,speed,aperture_speed\n";
    for (std::size_t i = 0; i < ft.t.size(); ++i) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%.3f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", ft.t[i],
                    ft.x[i], ft.y[i], ft.z[i], ft.aperture[i], ft.master_aperture[i], ft.speed[i],
                    ft.aperture_speed[i]);
      out << buf;
    }
  }
  {
    std::ofstream out(fs::path(out_dir) / "events.csv");
    out << "event,detected,ground_truth\n";
    auto row = [&](const char* name, double det, double truth) {
      out << name << "," << (det >= 0 ? std::to_string(det) : "") << ","
          << (truth >= 0 ? std::to_string(truth) : "") << "\n";
    };
    row("appearance", ev.appearance, ev.appearance);
    row("onset", ev.onset, log.event("onset"));
    row("transport_end", ev.transport_end, log.event("contact"));
    row("mga", ev.mga_time, log.event("mga"));
    row("lift_end", ev.lift_end, log.event("lift_end"));
    row("pantomime", ev.pantomime_time, log.event("confirm"));
  }
  std::fprintf(stderr, "replayed %s (%s)\n", log_file.c_str(),
               ev.analyzable ? "analyzable" : ("excluded: " + ev.reason).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teleoperated grasping simulator and transparency analysis"};
  app.require_subcommand(1);

  CommonOpts opts;

  // plan
  auto* plan = app.add_subcommand("plan", "generate cohort and per-subject trial plans");
  std::uint64_t plan_seed = 1;
  std::string plan_out = "out";
  std::string plan_cohort;
  plan->add_option("--seed", plan_seed, "master seed");
  plan->add_option("--out", plan_out, "output directory")->required();
  plan->add_option("--cohort", plan_cohort, "group sizes fine,normal,quick (default 10,11,10)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run trials from plan files into log files");
  std::string sim_cohort, sim_plans, sim_out, sim_subject;
  std::uint64_t sim_seed = 1;
  int sim_workers = 0;
  sim->add_option("--cohort", sim_cohort, "cohort.txt path")->required();
  sim->add_option("--plans", sim_plans, "plan directory")->required();
  sim->add_option("--out", sim_out, "log output directory")->required();
  sim->add_option("--seed", sim_seed, "master seed for trial randomness");
  sim->add_option("--workers", sim_workers, "worker threads (0 = hardware)");
  sim->add_option("--subject", sim_subject, "simulate a single subject");
  sim->add_option("--config", opts.config_file, "key=value config file (overrides flags)");
  sim->add_option("--population", opts.population_file, "population parameter file");

  // analyze
  auto* ana = app.add_subcommand("analyze", "extract metrics tables from trial logs");
  std::string ana_logs, ana_out;
  ana->add_option("--logs", ana_logs, "trial log directory")->required();
  ana->add_option("--out", ana_out, "output directory")->required();
  ana->add_option("--config", opts.config_file, "key=value config file");

  // fit
  auto* fit = app.add_subcommand("fit", "fit one mixed model from the aggregate table");
  std::string fit_agg, fit_metric = "mga", fit_stat = "mean", fit_exp = "action",
              fit_out = "fit.json";
  bool fit_log = false;
  fit->add_option("--aggregate", fit_agg, "aggregate.csv path")->required();
  fit->add_option("--metric", fit_metric, "metric name");
  fit->add_option("--stat", fit_stat, "mean or sd")->check(CLI::IsMember({"mean", "sd"}));
  fit->add_option("--experiment", fit_exp, "action or perception")
      ->check(CLI::IsMember({"action", "perception"}));
  fit->add_flag("--log-transform", fit_log, "fit log-transformed values");
  fit->add_option("--out", fit_out, "output JSON path");

  // verdict
  auto* ver = app.add_subcommand("verdict", "fit the model set and emit the verdict report");
  std::string ver_agg, ver_out = "out";
  double ver_alpha = 0.05;
  ver->add_option("--aggregate", ver_agg, "aggregate.csv path")->required();
  ver->add_option("--out", ver_out, "report output directory");
  ver->add_option("--alpha", ver_alpha, "significance level");

  // report
  auto* rep = app.add_subcommand("report", "plan, simulate, analyze and fit in one run");
  std::uint64_t rep_seed = 1;
  std::string rep_out = "out", rep_cohort;
  int rep_workers = 0;
  double rep_alpha = 0.05;
  bool rep_keep_logs = false;
  rep->add_option("--seed", rep_seed, "master seed");
  rep->add_option("--out", rep_out, "output directory")->required();
  rep->add_option("--cohort", rep_cohort, "group sizes fine,normal,quick");
  rep->add_option("--workers", rep_workers, "worker threads (0 = hardware)");
  rep->add_option("--alpha", rep_alpha, "significance level");
  rep->add_flag("--keep-logs", rep_keep_logs, "write every trial log to disk");
  rep->add_option("--config", opts.config_file, "key=value config file (overrides flags)");
  rep->add_option("--population", opts.population_file, "population parameter file");

  // replay
  auto* replay = app.add_subcommand("replay", "re-emit one trial's filtered traces and events");
  std::string replay_log, replay_out = "replay";
  replay->add_option("--log", replay_log, "trial log .csv path")->required();
  replay->add_option("--out", replay_out, "output directory");
  replay->add_option("--config", opts.config_file, "key=value config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(plan_seed, plan_out, plan_cohort);
    if (*sim)
      return cmd_simulate(sim_cohort, sim_plans, sim_out, sim_seed, sim_workers, sim_subject,
                          opts);
    if (*ana) return cmd_analyze(ana_logs, ana_out, opts);
    if (*fit) return cmd_fit(fit_agg, fit_metric, fit_stat, fit_exp, fit_log, fit_out);
    if (*ver) return cmd_verdict(ver_agg, ver_out, ver_alpha);
    if (*rep)
      return cmd_report(rep_seed, rep_out, rep_cohort, rep_workers, rep_alpha, rep_keep_logs,
                        opts);
    if (*replay) return cmd_replay(replay_log, replay_out, opts);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
