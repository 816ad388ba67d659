#include <benchmark/benchmark.h>

#include "tgrasp/metrics.hpp"
#include "tgrasp/pipeline.hpp"

using namespace tgrasp;

namespace {

static void BM_WireRoundTrip(benchmark::State& state) {
  Datagram d;
  d.seq = 42;
  d.t_send_us = 123456;
  d.desired = StateVector{0.1, 0.2, -0.1, 0, 0, 0, 0.5};
  for (auto _ : state) {
    const auto bytes = wire_encode(d);
    benchmark::DoNotOptimize(wire_decode(bytes.data(), bytes.size()));
    d.seq += 1;
  }
}
BENCHMARK(BM_WireRoundTrip);

static void BM_ChannelStep(benchmark::State& state) {
  ChannelConfig cfg;
  cfg.drop_prob = 0.05;
  cfg.delay_jitter_sd = 0.001;
  Channel ch(cfg);
  std::uint64_t seq = 0;
  double now = 0;
  Datagram d;
  for (auto _ : state) {
    d.seq = ++seq;
    ch.send(d, now);
    benchmark::DoNotOptimize(ch.receive(now));
    now += 1e-3;
  }
}
BENCHMARK(BM_ChannelStep);

static void BM_PlantStep(benchmark::State& state) {
  ArmModel arm;
  PDGains gains;
  PlantState s;
  s.q = {0.1, 0.4, 0.12, 0.3};
  const JointVec q_des = {0.12, 0.45, 0.13, 0.5};
  for (auto _ : state) {
    const JointVec gc = gravity_load(arm, s.q);
    plant_step(arm, s, pd_torque(q_des, s.q, s.qdot, gains, gc), 1e-3);
    benchmark::DoNotOptimize(s.q[0]);
  }
}
BENCHMARK(BM_PlantStep);

static void BM_RunTrial(benchmark::State& state) {
  PopulationParams pop;
  SubjectAgent agent = make_subject(3, Condition::normal, pop);
  agent.subject_id = "S01";
  const TeleopConfig cfg = config_for(Condition::normal);
  TrialSlot slot;
  slot.index = 11;
  slot.object.diameter_mm = 8;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_trial(agent, slot, Experiment::action, cfg, ++seed));
  }
}
BENCHMARK(BM_RunTrial)->Unit(benchmark::kMillisecond);

static void BM_AnalyzeTrial(benchmark::State& state) {
  PopulationParams pop;
  SubjectAgent agent = make_subject(3, Condition::normal, pop);
  agent.subject_id = "S01";
  const TeleopConfig cfg = config_for(Condition::normal);
  TrialSlot slot;
  slot.index = 11;
  slot.object.diameter_mm = 8;
  const TrialLog log = run_trial(agent, slot, Experiment::action, cfg, 7);
  for (auto _ : state) benchmark::DoNotOptimize(analyze_trial(log));
}
BENCHMARK(BM_AnalyzeTrial)->Unit(benchmark::kMicrosecond);

static void BM_Filtfilt(benchmark::State& state) {
  const FilterBA f = butterworth_lowpass(4, 10.0, 100.0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  Rng rng(1);
  for (auto& v : x) v = rng.gaussian(0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(filtfilt(f, x));
}
BENCHMARK(BM_Filtfilt)->Arg(256)->Arg(1024);

static void BM_FitLmm(benchmark::State& state) {
  Rng rng(4);
  LongTable t;
  t.metric = "mga";
  t.statistic = "mean";
  int id = 0;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 10; ++s) {
      const double u = 0.1 * rng.gaussian();
      ++id;
      for (double d : kObjectSetMm)
        t.rows.push_back({"P" + std::to_string(id), static_cast<Condition>(c), d,
                          1.0 + 0.05 * (d - 8.0) + u + 0.05 * rng.gaussian()});
    }
  for (auto _ : state) benchmark::DoNotOptimize(fit_lmm(t));
}
BENCHMARK(BM_FitLmm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
