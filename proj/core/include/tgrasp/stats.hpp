#pragma once

#include <array>
#include <string>
#include <vector>

#include "tgrasp/types.hpp"

namespace tgrasp {

// One row of the modelling table: a per-subject x object statistic.
struct LongRow {
  std::string subject;
  Condition condition = Condition::normal;
  double diameter_mm = 0;
  double value = 0;
};

struct LongTable {
  std::string metric;     // e.g. "mga"
  std::string statistic;  // "mean" or "sd"
  bool log_transform = false;  // applied to value before fitting (timing metrics)
  double center_mm = 8.0;      // diameter centering, so intercepts are adjusted means
  std::vector<LongRow> rows;
};

struct SlopeInfo {
  double estimate = 0, se = 0, t = 0, df = 0, p_two = 1;
};

// One-sided test of a per-condition slope in a pre-declared direction.
struct SlopeTest {
  double estimate = 0, se = 0, t = 0, df = 0;
  int direction = +1;  // +1: H1 slope > 0, -1: H1 slope < 0
  double p = 1;        // one-sided in `direction`
  double p_two = 1;
};

struct AdjustedMean {
  double estimate = 0, se = 0, df = 0, ci_lo = 0, ci_hi = 0;
};

struct OmnibusF {
  double F = 0, df1 = 0, df2 = 0, p = 1;
};

// Random-intercept Gaussian LMM fitted by REML:
//   y = X beta + u_subject + eps,  u ~ N(0, sigma2_u), eps ~ N(0, sigma2_eps)
// X columns: intercept, normal, quick, dc, normal x dc, quick x dc, where
// dc is the diameter centered at center_mm and fine is the reference
// level. Per-condition slope = beta_dc + beta_interaction[condition].
struct FitResult {
  bool converged = false;
  std::string error;
  std::string metric, statistic;
  bool log_transform = false;
  int n_rows = 0, n_subjects = 0;
  double center_mm = 8.0;

  std::array<std::string, 6> coef_names = {"intercept", "cond_normal",    "cond_quick",
                                           "diameter",  "normal:diameter", "quick:diameter"};
  std::array<double, 6> beta{}, se{};
  std::array<double, 36> cov{};  // row-major covariance of beta

  double sigma2_u = 0, sigma2_eps = 0, lambda = 0;  // lambda = sigma2_u / sigma2_eps
  bool boundary = false;                            // sigma2_u clamped at 0
  double reml_objective = 0;  // profiled -2 restricted log likelihood (up to constant)
  double reml_gradient = 0;   // central-difference d/dlambda at the optimum

  std::array<SlopeInfo, 3> slopes;       // fine, normal, quick
  std::array<AdjustedMean, 3> adjusted;  // at the centered diameter, 95% CI
  OmnibusF f_condition, f_diameter, f_interaction;

  std::vector<double> residuals;  // conditional residuals y - X beta - u_hat
};

// Throws ValidationError on rank-deficient designs (naming the collinear
// columns) or precondition violations; throws SimulationFault with
// bracket diagnostics when the variance search fails to converge.
FitResult fit_lmm(const LongTable& table);

// Profiled REML objective in the variance ratio, exposed so stationarity
// can be verified independently of the optimizer.
double reml_profile_objective(const LongTable& table, double lambda);

// Per-subject OLS slopes plus a one-sample t-test per condition; the
// independent cross-check for the mixed model ("two-stage" analysis).
struct TwoStageCondition {
  int n_subjects = 0;
  double mean_slope = 0, sd_slope = 0;
  double t = 0, df = 0, p_two = 1;
  double mean_center = 0;  // mean of per-subject values at the centered diameter
};
struct SubjectFit {
  std::string subject;
  Condition condition;
  double slope = 0, intercept_at_center = 0;
};
struct TwoStageResult {
  std::array<TwoStageCondition, 3> by_condition;
  std::vector<SubjectFit> subjects;
  std::vector<std::string> warnings;
};
TwoStageResult two_stage_ols(const LongTable& table);

// One-sided slope tests in pre-declared directions (+1 or -1 per
// condition); df are the Satterthwaite values from the fit.
std::array<SlopeTest, 3> slope_tests(const FitResult& fit, const std::array<int, 3>& directions);

std::array<AdjustedMean, 3> adjusted_means(const FitResult& fit, double alpha = 0.05);

struct BartlettResult {
  double statistic = 0, df = 0, p = 1;
};
// Throws ValidationError for groups with n < 2 or zero variance.
BartlettResult bartlett(const std::vector<std::vector<double>>& groups);

struct QQPoint {
  double theoretical = 0, empirical = 0;
};
// Sorted standardized conditional residuals against normal quantiles at
// (i - 0.5) / n.
std::vector<QQPoint> qq_residuals(const FitResult& fit);

struct ConditionVerdict {
  bool action_mean_ok = false;
  bool action_sd_weber_violated = false;
  bool perception_mean_ok = false;
  bool perception_sd_weber_obeyed = false;
  bool transparent = false;
  // supporting evidence: slope estimate and the p value each flag used
  double action_mean_slope = 0, action_mean_p = 1;
  double action_sd_slope = 0, action_sd_p_two = 1, action_sd_p_neg = 1;
  double perception_mean_slope = 0, perception_mean_p = 1;
  double perception_sd_slope = 0, perception_sd_p = 1;
};

struct TransparencyVerdict {
  double alpha = 0.05;
  std::array<ConditionVerdict, 3> by_condition;  // fine, normal, quick
};

// Per condition: mean-MGA slope positive and significant, SD-MGA slope
// not significant two-sided, mean-PS slope positive and significant,
// SD-PS slope positive and significant; transparent is their conjunction.
TransparencyVerdict transparency_verdict(const FitResult& action_mean, const FitResult& action_sd,
                                         const FitResult& perception_mean,
                                         const FitResult& perception_sd, double alpha = 0.05);

}  // namespace tgrasp
