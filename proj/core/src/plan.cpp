#include "tgrasp/plan.hpp"

#include <algorithm>
#include <map>

#include "tgrasp/rng.hpp"

namespace tgrasp {

Condition condition_from_string(const std::string& s) {
  if (s == "fine") return Condition::fine;
  if (s == "normal") return Condition::normal;
  if (s == "quick") return Condition::quick;
  throw ValidationError("unknown condition: " + s);
}

Experiment experiment_from_string(const std::string& s) {
  if (s == "action") return Experiment::action;
  if (s == "perception") return Experiment::perception;
  throw ValidationError("unknown experiment: " + s);
}

ExperimentPlan make_plan(Condition condition, Experiment experiment, std::uint64_t seed) {
  ExperimentPlan plan;
  plan.condition = condition;
  plan.experiment = experiment;
  plan.seed = seed;

  std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(condition) + 1);
  h = hash_combine(h, static_cast<std::uint64_t>(experiment) + 101);
  Rng rng(h);

  const int blocks = ExperimentPlan::kTrials / ExperimentPlan::kBlock;
  plan.trials.reserve(ExperimentPlan::kTrials);
  for (int b = 0; b < blocks; ++b) {
    // bag of 5 objects x 2, shuffled independently per block
    std::vector<double> bag;
    for (double d : kObjectSetMm) {
      bag.push_back(d);
      bag.push_back(d);
    }
    Rng block_rng = rng.fork(static_cast<std::uint64_t>(b));
    block_rng.shuffle(bag);
    for (int i = 0; i < ExperimentPlan::kBlock; ++i) {
      TrialSlot slot;
      slot.index = b * ExperimentPlan::kBlock + i + 1;
      slot.object.diameter_mm = bag[static_cast<std::size_t>(i)];
      slot.is_training = slot.index <= ExperimentPlan::kTraining;
      plan.trials.push_back(slot);
    }
  }
  return plan;
}

std::vector<std::string> validate_plan(const ExperimentPlan& plan) {
  std::vector<std::string> out;
  if (static_cast<int>(plan.trials.size()) != ExperimentPlan::kTrials) {
    out.push_back("trial count: expected 110, got " + std::to_string(plan.trials.size()));
    return out;  // further checks assume the right shape
  }
  std::map<double, int> per_object;
  for (const auto& t : plan.trials) per_object[t.object.diameter_mm] += 1;
  for (const auto& [d, n] : per_object)
    if (n != ExperimentPlan::kPerObject)
      out.push_back("per-object count: " + std::to_string(d) + " mm appears " +
                    std::to_string(n) + "x, expected 22");
  if (per_object.size() != kObjectSetMm.size()) out.push_back("object set: expected 5 diameters");

  const int blocks = ExperimentPlan::kTrials / ExperimentPlan::kBlock;
  for (int b = 0; b < blocks; ++b) {
    std::map<double, int> in_block;
    for (int i = 0; i < ExperimentPlan::kBlock; ++i)
      in_block[plan.trials[static_cast<std::size_t>(b * 10 + i)].object.diameter_mm] += 1;
    for (const auto& [d, n] : in_block)
      if (n != 2)
        out.push_back("block constraint: block " + std::to_string(b + 1) + ", " +
                      std::to_string(d) + " mm appears " + std::to_string(n) + "x");
  }
  for (const auto& t : plan.trials) {
    const bool want = t.index <= ExperimentPlan::kTraining;
    if (t.is_training != want) {
      out.push_back("training flags: trials 1-10 must be training, others not");
      break;
    }
  }
  return out;
}

CohortPlan make_cohort(std::uint64_t seed, const CohortSizes& sizes) {
  if (sizes.fine < 0 || sizes.normal < 0 || sizes.quick < 0)
    throw ValidationError("cohort: sizes must be >= 0");
  CohortPlan cohort;
  cohort.seed = seed;
  cohort.sizes = sizes;

  Rng rng(hash_combine(seed, 0xc0c0c0ULL));
  int subject_no = 0;
  const std::array<std::pair<Condition, int>, 3> groups = {
      {{Condition::fine, sizes.fine}, {Condition::normal, sizes.normal}, {Condition::quick, sizes.quick}}};
  for (const auto& [cond, n] : groups) {
    // balanced experiment order within the group, assignment shuffled
    std::vector<Experiment> order;
    for (int i = 0; i < n; ++i)
      order.push_back(i < (n + 1) / 2 ? Experiment::action : Experiment::perception);
    Rng group_rng = rng.fork(static_cast<std::uint64_t>(cond) + 7);
    group_rng.shuffle(order);
    for (int i = 0; i < n; ++i) {
      ++subject_no;
      SubjectPlan s;
      char buf[16];
      std::snprintf(buf, sizeof buf, "S%02d", subject_no);
      s.subject_id = buf;
      s.condition = cond;
      s.first_experiment = order[static_cast<std::size_t>(i)];
      s.agent_seed = hash_str(hash_combine(seed, 0xa6e17ULL), s.subject_id.c_str());
      s.plan_seed_action =
          hash_combine(hash_combine(seed, static_cast<std::uint64_t>(cond) + 11), 1);
      s.plan_seed_perception =
          hash_combine(hash_combine(seed, static_cast<std::uint64_t>(cond) + 11), 2);
      cohort.subjects.push_back(std::move(s));
    }
  }
  return cohort;
}

std::vector<std::string> validate_cohort(const CohortPlan& cohort) {
  std::vector<std::string> out;
  std::map<Condition, int> n, action_first;
  for (const auto& s : cohort.subjects) {
    n[s.condition] += 1;
    if (s.first_experiment == Experiment::action) action_first[s.condition] += 1;
  }
  if (n[Condition::fine] != cohort.sizes.fine || n[Condition::normal] != cohort.sizes.normal ||
      n[Condition::quick] != cohort.sizes.quick)
    out.push_back("group sizes do not match requested sizes");
  for (const auto& [cond, total] : n) {
    const int a = action_first[cond];
    if (std::abs(2 * a - total) > 1)
      out.push_back(std::string("experiment order unbalanced in group ") + to_string(cond));
  }
  return out;
}

}  // namespace tgrasp
