#include <algorithm>
#include <cmath>

#include "corpus.hpp"
#include "doctest.h"

using namespace tgrasp;
using tgrasp::testing::synth_log;

namespace {

SubjectAgent default_agent(std::uint64_t seed, Condition c = Condition::normal) {
  PopulationParams pop;
  SubjectAgent a = make_subject(seed, c, pop);
  a.subject_id = "SYN";
  a.params.phenotype = Phenotype::during_reach;
  a.params.mga_timing_fraction = 0.65;
  return a;
}

}  // namespace

TEST_CASE("preprocess decimates to 100 Hz and keeps events") {
  const TrialLog log = synth_log(default_agent(1), 8.0, Experiment::action, 100);
  const FilteredTrial ft = preprocess(log);
  CHECK(ft.fs() == doctest::Approx(100.0));
  CHECK(ft.t.size() == (log.size() + 9) / 10);
  CHECK(ft.event("go") == log.event("go"));
  CHECK(ft.event("onset") == log.event("onset"));
}

TEST_CASE("preprocess rejects infeasible or too-short trials") {
  TrialLog log;
  log.meta.feasible = false;
  CHECK_THROWS_AS(preprocess(log), ValidationError);
}

TEST_CASE("event recovery on a noiseless synthetic corpus") {
  // 200 during-reach trials; the acceptance suite runs the full 1000
  std::vector<double> onset_err_ms, fracs;
  int mga_window_exact = 0, n = 0;
  double worst_mga = 0, worst_path = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    SubjectAgent agent = default_agent(1000 + s, s % 2 ? Condition::normal : Condition::quick);
    for (double d : kObjectSetMm) {
      const TrialLog log = synth_log(agent, d, Experiment::action, 5000 + s * 5 + (std::uint64_t)d);
      const FilteredTrial ft = preprocess(log);
      const DetectedEvents ev = detect_events(ft);
      REQUIRE(ev.analyzable);
      const TrialMetrics m = compute_metrics(ft, ev);
      ++n;
      onset_err_ms.push_back(std::fabs(ev.onset - log.event("onset")) * 1e3);
      fracs.push_back(m.mga_time_fraction);
      // the detected MGA equals the global maximum of the filtered trace
      double global_max = -1;
      for (double v : ft.aperture) global_max = std::max(global_max, v);
      if (m.mga == global_max) ++mga_window_exact;
      worst_mga = std::max(worst_mga, std::fabs(m.mga - log.meta.intended_mga));
      worst_path = std::max(worst_path, std::fabs(m.path_length - 40.0));
    }
  }
  std::sort(onset_err_ms.begin(), onset_err_ms.end());
  const double median = onset_err_ms[onset_err_ms.size() / 2];
  CHECK(median < 20.0);
  CHECK(mga_window_exact == n);
  CHECK(worst_mga < 5e-3);  // smoothing bias of the 10 Hz zero-phase filter on the aperture peak
  CHECK(worst_path < 0.5);
  double fsum = 0;
  for (double f : fracs) fsum += f;
  CHECK(fsum / static_cast<double>(fracs.size()) == doctest::Approx(0.65).epsilon(0.077));
}

TEST_CASE("pre-opener timing fractions clamp to exactly zero") {
  PopulationParams pop;
  for (std::uint64_t s = 0; s < 12; ++s) {
    SubjectAgent agent = make_subject(300 + s, Condition::normal, pop);
    agent.subject_id = "SYN";
    agent.params.phenotype = Phenotype::pre_opener;
    const TrialLog log = synth_log(agent, 8.0, Experiment::action, 900 + s);
    const TrialMetrics m = analyze_trial(log);
    REQUIRE(m.analyzable);
    CHECK(m.mga_time_fraction == 0.0);
  }
}

TEST_CASE("zero-motion trials are flagged unanalyzable") {
  TrialLog log;
  log.meta.feasible = true;
  log.meta.object_pos = {0.062, 0.034, -0.10};
  for (int i = 0; i < 2000; ++i) {
    log.t.push_back(i * 1e-3);
    log.x.push_back(0.03);
    log.y.push_back(0.01);
    log.z.push_back(-0.10);
    log.aperture.push_back(0.0);
    log.master_aperture.push_back(0.0);
  }
  log.add_event("go", 0.3);
  const TrialMetrics m = analyze_trial(log);
  CHECK(!m.analyzable);
  CHECK(m.exclude_reason == "no speed peak");
}

TEST_CASE("missing lift leaves total_time missing, not zero") {
  const TrialLog full = synth_log(default_agent(7), 10.0, Experiment::action, 321);
  TrialLog cut = full;
  // truncate shortly after the grasp completes, before the lift
  const double t_cut = full.event("contact") + 0.05;
  const std::size_t keep = static_cast<std::size_t>(t_cut / 1e-3);
  for (auto* v : {&cut.t, &cut.x, &cut.y, &cut.z, &cut.aperture, &cut.master_aperture})
    v->resize(keep);
  const TrialMetrics m = analyze_trial(cut);
  REQUIRE(m.analyzable);
  CHECK(is_missing(m.total_time));
  CHECK(!is_missing(m.mga));
}

TEST_CASE("perception trials recover the pantomimed size and its timing") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    SubjectAgent agent = default_agent(40 + s, Condition::normal);
    const TrialLog log = synth_log(agent, 10.0, Experiment::perception, 777 + s);
    const TrialMetrics m = analyze_trial(log);
    REQUIRE(m.analyzable);
    REQUIRE(!is_missing(m.ps));
    CHECK(std::fabs(m.ps - log.meta.intended_ps) < 1e-3);
    CHECK(m.perception_time == doctest::Approx(log.event("confirm") - log.event("shown")));
    // the reach of a perception trial is not analyzed
    CHECK(is_missing(m.mga));
    CHECK(is_missing(m.reaction_time));
  }
}

TEST_CASE("aggregate computes sample statistics with the n-1 denominator") {
  std::vector<TrialMetrics> trials;
  auto mk = [&](int idx, double mga, bool training = false) {
    TrialMetrics m;
    m.subject_id = "S01";
    m.condition = Condition::fine;
    m.experiment = Experiment::action;
    m.trial_index = idx;
    m.object_mm = 8.0;
    m.is_training = training;
    m.analyzable = true;
    m.mga = mga;
    return m;
  };
  trials.push_back(mk(11, 1.0));
  trials.push_back(mk(12, 2.0));
  trials.push_back(mk(13, 3.0));
  trials.push_back(mk(1, 99.0, true));  // training: excluded
  const auto agg = aggregate(trials);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].n[0] == 3);
  CHECK(agg[0].mean[0] == doctest::Approx(2.0));
  CHECK(agg[0].sd[0] == doctest::Approx(1.0));
  CHECK(!agg[0].low_confidence[0]);
}

TEST_CASE("identical values aggregate to zero SD") {
  std::vector<TrialMetrics> trials;
  for (int i = 0; i < 20; ++i) {
    TrialMetrics m;
    m.subject_id = "S02";
    m.experiment = Experiment::action;
    m.object_mm = 6.0;
    m.trial_index = 11 + i;
    m.analyzable = true;
    m.mga = 0.75;
    trials.push_back(m);
  }
  const auto agg = aggregate(trials);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].mean[0] == doctest::Approx(0.75));
  CHECK(agg[0].sd[0] == 0.0);
}

TEST_CASE("aggregation separates subjects, objects and experiments") {
  std::vector<TrialMetrics> trials;
  for (const char* subj : {"S01", "S02"})
    for (double d : {4.0, 8.0})
      for (int e = 0; e < 2; ++e) {
        TrialMetrics m;
        m.subject_id = subj;
        m.experiment = static_cast<Experiment>(e);
        m.object_mm = d;
        m.trial_index = 11;
        m.analyzable = true;
        m.mga = 1.0;
        m.ps = 0.5;
        trials.push_back(m);
        trials.push_back(m);
      }
  const auto agg = aggregate(trials);
  CHECK(agg.size() == 8);  // 2 subjects x 2 objects x 2 experiments
}

TEST_CASE("fewer than 3 analyzable trials flags low confidence") {
  std::vector<TrialMetrics> trials;
  for (int i = 0; i < 2; ++i) {
    TrialMetrics m;
    m.subject_id = "S03";
    m.experiment = Experiment::action;
    m.object_mm = 10.0;
    m.trial_index = 11 + i;
    m.analyzable = true;
    m.mga = 1.0 + i;
    trials.push_back(m);
  }
  const auto agg = aggregate(trials);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].low_confidence[0]);
}

TEST_CASE("a full synthetic subject recovers the injected aperture noise") {
  // 20 analyzed trials per object, as in the protocol
  PopulationParams pop;
  SubjectAgent agent = default_agent(17, Condition::quick);
  agent.params.mga_sd = 0.05;
  std::vector<TrialMetrics> trials;
  std::uint64_t seed = 0;
  for (double d : kObjectSetMm)
    for (int rep = 0; rep < 20; ++rep) {
      TrialLog log = synth_log(agent, d, Experiment::action, 4242 + ++seed);
      log.meta.trial_index = 11 + static_cast<int>(seed);
      trials.push_back(analyze_trial(log));
    }
  const auto agg = aggregate(trials);
  REQUIRE(agg.size() == 5);
  for (const auto& g : agg) {
    CHECK(g.n[0] == 20);
    // sample SD of 20 draws: 3 sigma CI around the injected value
    CHECK(g.sd[0] == doctest::Approx(0.05).epsilon(0.55));
  }
}
