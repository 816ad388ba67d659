#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgrasp/types.hpp"

namespace tgrasp {

// One trial slot in an experiment plan.
struct TrialSlot {
  int index = 0;  // 1-based
  ObjectSpec object;
  bool is_training = false;
};

// 110 trials, 22 per object; in every block of 10 each object appears
// exactly twice; trials 1-10 are training. Object order is a pure
// function of (condition, experiment, seed).
struct ExperimentPlan {
  Condition condition = Condition::normal;
  Experiment experiment = Experiment::action;
  std::uint64_t seed = 0;
  std::vector<TrialSlot> trials;

  static constexpr int kTrials = 110;
  static constexpr int kBlock = 10;
  static constexpr int kPerObject = 22;
  static constexpr int kTraining = 10;
};

ExperimentPlan make_plan(Condition condition, Experiment experiment, std::uint64_t seed);

// Empty result means the plan satisfies every invariant. Each violation
// is a short stable code plus detail.
std::vector<std::string> validate_plan(const ExperimentPlan& plan);

struct SubjectPlan {
  std::string subject_id;
  Condition condition = Condition::normal;
  Experiment first_experiment = Experiment::action;
  std::uint64_t agent_seed = 0;
  // Shared per (condition, experiment) by default so the object order is
  // identical across subjects, as in the original protocol.
  std::uint64_t plan_seed_action = 0;
  std::uint64_t plan_seed_perception = 0;
};

struct CohortSizes {
  int fine = 10;
  int normal = 11;
  int quick = 10;
  int total() const { return fine + normal + quick; }
};

struct CohortPlan {
  std::uint64_t seed = 0;
  CohortSizes sizes;
  std::vector<SubjectPlan> subjects;
};

// Deterministic cohort: group sizes per condition, per-subject seeds, and
// experiment order balanced within each group (counts differ by at most 1).
CohortPlan make_cohort(std::uint64_t seed, const CohortSizes& sizes = {});

std::vector<std::string> validate_cohort(const CohortPlan& cohort);

}  // namespace tgrasp
