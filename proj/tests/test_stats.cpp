#include <cmath>
#include <map>

#include "doctest.h"
#include "tgrasp/dists.hpp"
#include "tgrasp/rng.hpp"
#include "tgrasp/stats.hpp"

using namespace tgrasp;

namespace {

// Balanced synthetic table: every subject sees each diameter once.
LongTable synth_table(std::uint64_t seed, int per_group, double sigma_u, double sigma_e,
                      const std::array<double, 3>& intercepts = {1.0, 1.2, 1.4},
                      const std::array<double, 3>& slopes = {0.05, 0.08, 0.10}) {
  Rng rng(seed);
  LongTable t;
  t.metric = "mga";
  t.statistic = "mean";
  int id = 0;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < per_group; ++s) {
      const double u = sigma_u * rng.gaussian();
      ++id;
      char buf[16];
      std::snprintf(buf, sizeof buf, "P%03d", id);
      for (double d : kObjectSetMm) {
        LongRow r;
        r.subject = buf;
        r.condition = static_cast<Condition>(c);
        r.diameter_mm = d;
        r.value = intercepts[static_cast<std::size_t>(c)] +
                  slopes[static_cast<std::size_t>(c)] * (d - 8.0) + u + sigma_e * rng.gaussian();
        t.rows.push_back(r);
      }
    }
  return t;
}

// Closed-form ANOVA method-of-moments estimates for the balanced design
// with per-condition intercepts and slopes; the REML oracle.
struct AnovaEstimates {
  double sigma2_eps = 0, sigma2_u = 0;
};
AnovaEstimates anova_oracle(const LongTable& t) {
  struct Subj {
    std::vector<std::pair<double, double>> rows;  // centered diameter, value
    Condition cond{};
  };
  std::map<std::string, Subj> subj;
  for (const auto& r : t.rows) {
    subj[r.subject].rows.push_back({r.diameter_mm - t.center_mm, r.value});
    subj[r.subject].cond = r.condition;
  }
  const int m = static_cast<int>(subj.size());
  const int J = static_cast<int>(subj.begin()->second.rows.size());
  std::array<double, 3> sxx{}, sxy{};
  std::map<std::string, double> smean;
  for (auto& [id, s] : subj) {
    double ybar = 0;
    for (auto& [dc, y] : s.rows) ybar += y;
    ybar /= static_cast<double>(s.rows.size());
    smean[id] = ybar;
    for (auto& [dc, y] : s.rows) {
      sxx[static_cast<std::size_t>(s.cond)] += dc * dc;
      sxy[static_cast<std::size_t>(s.cond)] += dc * (y - ybar);
    }
  }
  std::array<double, 3> b{};
  for (int c = 0; c < 3; ++c) b[static_cast<std::size_t>(c)] = sxy[static_cast<std::size_t>(c)] / sxx[static_cast<std::size_t>(c)];
  double sse_w = 0;
  for (auto& [id, s] : subj)
    for (auto& [dc, y] : s.rows) {
      const double e = y - smean[id] - b[static_cast<std::size_t>(s.cond)] * dc;
      sse_w += e * e;
    }
  const double ms_e = sse_w / (m * (J - 1) - 3);
  std::array<double, 3> condsum{};
  std::array<int, 3> condn{};
  for (auto& [id, s] : subj) {
    condsum[static_cast<std::size_t>(s.cond)] += smean[id];
    condn[static_cast<std::size_t>(s.cond)] += 1;
  }
  double ssb = 0;
  for (auto& [id, s] : subj) {
    const double cm = condsum[static_cast<std::size_t>(s.cond)] / condn[static_cast<std::size_t>(s.cond)];
    ssb += (smean[id] - cm) * (smean[id] - cm);
  }
  const double ms_s = static_cast<double>(J) * ssb / (m - 3);
  return {ms_e, std::max(0.0, (ms_s - ms_e) / J)};
}

}  // namespace

TEST_CASE("balanced fits match the two-stage OLS oracle to 1e-8") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const LongTable t = synth_table(seed, 4 + static_cast<int>(seed % 4), 0.1, 0.05);
    const FitResult fit = fit_lmm(t);
    REQUIRE(fit.converged);
    const TwoStageResult ts = two_stage_ols(t);
    for (int c = 0; c < 3; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      REQUIRE(std::fabs(fit.slopes[ci].estimate - ts.by_condition[ci].mean_slope) < 1e-8);
      REQUIRE(std::fabs(fit.adjusted[ci].estimate - ts.by_condition[ci].mean_center) < 1e-8);
    }
  }
}

TEST_CASE("balanced variance components match the ANOVA estimators to 1e-8") {
  for (std::uint64_t seed = 11; seed <= 20; ++seed) {
    const LongTable t = synth_table(seed, 5, 0.1, 0.05);
    const FitResult fit = fit_lmm(t);
    const AnovaEstimates oracle = anova_oracle(t);
    REQUIRE(std::fabs(fit.sigma2_eps - oracle.sigma2_eps) < 1e-8);
    REQUIRE(std::fabs(fit.sigma2_u - oracle.sigma2_u) < 1e-8);
  }
}

TEST_CASE("REML objective is stationary at the fitted variance ratio") {
  const LongTable t = synth_table(4, 6, 0.1, 0.05);
  const FitResult fit = fit_lmm(t);
  REQUIRE(!fit.boundary);
  const double h = 1e-4 * (1.0 + fit.lambda);  // above the objective noise floor
  const double g = (reml_profile_objective(t, fit.lambda + h) -
                    reml_profile_objective(t, fit.lambda - h)) /
                   (2 * h);
  CHECK(std::fabs(g) < 1e-6);
  CHECK(std::fabs(fit.reml_gradient) < 1e-6);
}

TEST_CASE("generative slope recovery stays inside the sampling band") {
  // beta_size = 0.05 for the reference condition; 3 sigma band per fit
  int inside = 0;
  const int runs = 12;
  for (std::uint64_t seed = 30; seed < 30 + runs; ++seed) {
    const LongTable t = synth_table(seed, 8, 0.1, 0.05, {1, 1, 1}, {0.05, 0.05, 0.05});
    const FitResult fit = fit_lmm(t);
    if (std::fabs(fit.slopes[0].estimate - 0.05) < 3 * fit.slopes[0].se) ++inside;
  }
  CHECK(inside >= runs - 1);
}

TEST_CASE("negative subject variance clamps to the boundary with a flag") {
  // within-subject noise dominates: true sigma_u = 0
  const LongTable t = synth_table(77, 6, 0.0, 0.3);
  const FitResult fit = fit_lmm(t);
  CHECK(fit.converged);
  if (fit.boundary) {
    CHECK(fit.sigma2_u == 0.0);
    CHECK(fit.lambda == 0.0);
  }
  CHECK(fit.sigma2_u >= 0.0);
  CHECK(fit.sigma2_eps > 0.0);
}

TEST_CASE("per-condition slope reconstruction is exact") {
  const LongTable t = synth_table(5, 5, 0.1, 0.05);
  const FitResult fit = fit_lmm(t);
  CHECK(fit.slopes[0].estimate == fit.beta[3]);
  CHECK(fit.slopes[1].estimate == doctest::Approx(fit.beta[3] + fit.beta[4]).epsilon(1e-15));
  CHECK(fit.slopes[2].estimate == doctest::Approx(fit.beta[3] + fit.beta[5]).epsilon(1e-15));
}

TEST_CASE("rank-deficient designs name the collinear columns") {
  LongTable t;
  t.metric = "mga";
  t.statistic = "mean";
  // normal and quick subjects see a single diameter: their interaction
  // columns vanish
  int id = 0;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 3; ++s) {
      ++id;
      for (double d : kObjectSetMm) {
        if (c > 0 && d != 8.0) continue;
        LongRow r;
        r.subject = "P" + std::to_string(id);
        r.condition = static_cast<Condition>(c);
        r.diameter_mm = d;
        r.value = 1.0 + 0.1 * d + 0.01 * id;
        t.rows.push_back(r);
      }
    }
  CHECK_THROWS_WITH_AS(fit_lmm(t), doctest::Contains("collinear"), ValidationError);
}

TEST_CASE("preconditions are enforced") {
  CHECK_THROWS_AS(fit_lmm(LongTable{}), ValidationError);
  LongTable one_diameter = synth_table(1, 5, 0.1, 0.05);
  for (auto& r : one_diameter.rows) r.diameter_mm = 8.0;
  CHECK_THROWS_AS(fit_lmm(one_diameter), ValidationError);
}

TEST_CASE("log-transform path equals fitting pre-logged values") {
  LongTable t = synth_table(9, 5, 0.05, 0.02, {1.0, 1.1, 1.2}, {0.01, 0.01, 0.01});
  for (auto& r : t.rows) r.value = std::exp(r.value);  // strictly positive
  LongTable logged = t;
  logged.log_transform = false;
  for (auto& r : logged.rows) r.value = std::log(r.value);
  t.log_transform = true;
  const FitResult a = fit_lmm(t);
  const FitResult b = fit_lmm(logged);
  for (int i = 0; i < 6; ++i)
    CHECK(a.beta[static_cast<std::size_t>(i)] == b.beta[static_cast<std::size_t>(i)]);
  CHECK(a.sigma2_eps == b.sigma2_eps);
}

TEST_CASE("verdict is invariant to positive rescaling of the response") {
  const LongTable t = synth_table(13, 6, 0.1, 0.05);
  LongTable scaled = t;
  for (auto& r : scaled.rows) r.value *= 1000.0;  // mm -> m style change
  const FitResult a = fit_lmm(t);
  const FitResult b = fit_lmm(scaled);
  for (int c = 0; c < 3; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    // invariance up to optimizer and finite-difference noise
    CHECK(a.slopes[ci].t == doctest::Approx(b.slopes[ci].t).epsilon(1e-6));
    CHECK(a.slopes[ci].p_two == doctest::Approx(b.slopes[ci].p_two).epsilon(1e-6));
    CHECK(std::fabs(a.slopes[ci].df - b.slopes[ci].df) < 0.05);
  }
  const TransparencyVerdict va = transparency_verdict(a, a, a, a);
  const TransparencyVerdict vb = transparency_verdict(b, b, b, b);
  for (int c = 0; c < 3; ++c)
    CHECK(va.by_condition[static_cast<std::size_t>(c)].transparent ==
          vb.by_condition[static_cast<std::size_t>(c)].transparent);
}

TEST_CASE("two-stage OLS on exact lines") {
  LongTable t;
  t.metric = "mga";
  t.statistic = "mean";
  int id = 0;
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < 3; ++s) {
      ++id;
      for (double d : kObjectSetMm) {
        LongRow r;
        r.subject = "P" + std::to_string(id);
        r.condition = static_cast<Condition>(c);
        r.diameter_mm = d;
        r.value = 2.0 + 0.5 * d;  // identical exact line for everyone
        t.rows.push_back(r);
      }
    }
  const TwoStageResult ts = two_stage_ols(t);
  for (int c = 0; c < 3; ++c) {
    CHECK(ts.by_condition[static_cast<std::size_t>(c)].mean_slope == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ts.by_condition[static_cast<std::size_t>(c)].sd_slope == doctest::Approx(0.0));
  }
}

TEST_CASE("two-stage drops subjects with a single diameter") {
  LongTable t = synth_table(2, 3, 0.1, 0.05);
  for (int i = 0; i < 5; ++i) {
    LongRow r;
    r.subject = "LONE";
    r.condition = Condition::fine;
    r.diameter_mm = 8.0;
    r.value = 1.0;
    t.rows.push_back(r);
  }
  const TwoStageResult ts = two_stage_ols(t);
  REQUIRE(!ts.warnings.empty());
  CHECK(ts.warnings.front().find("LONE") != std::string::npos);
}

TEST_CASE("one-sided slope tests follow the declared direction") {
  FitResult fit;
  fit.converged = true;
  for (int c = 0; c < 3; ++c) {
    auto& s = fit.slopes[static_cast<std::size_t>(c)];
    s.estimate = 0.0;
    s.se = 1.0;
    s.t = 0.0;
    s.df = 1000;
    s.p_two = 1.0;
  }
  const auto pos = slope_tests(fit, {+1, +1, +1});
  CHECK(pos[0].p == doctest::Approx(0.5).epsilon(1e-9));  // null center
  fit.slopes[0].t = 0.87;
  fit.slopes[0].df = 1e6;
  const auto t087 = slope_tests(fit, {+1, +1, +1});
  CHECK(t087[0].p == doctest::Approx(0.19).epsilon(0.02));
  fit.slopes[0].t = 2.86;
  fit.slopes[0].df = 121;
  const auto t286 = slope_tests(fit, {+1, +1, +1});
  CHECK(t286[0].p < 0.01);
  // negative direction flips the tail
  fit.slopes[0].t = -2.16;
  const auto neg = slope_tests(fit, {-1, -1, -1});
  CHECK(neg[0].p < 0.05);
}

TEST_CASE("adjusted means evaluate the line at the centered diameter") {
  // uncentered evaluation: intercept 0.3 + 0.05/mm at 8 mm
  CHECK(0.3 + 0.05 * 8.0 == doctest::Approx(0.7));
  // centered model: the condition intercept is the adjusted mean
  const LongTable t = synth_table(21, 6, 0.05, 0.02);
  const FitResult fit = fit_lmm(t);
  CHECK(fit.adjusted[0].estimate == fit.beta[0]);
  CHECK(fit.adjusted[1].estimate ==
        doctest::Approx(fit.beta[0] + fit.beta[1]).epsilon(1e-15));
  const auto am99 = adjusted_means(fit, 0.01);
  CHECK(am99[0].ci_hi - am99[0].ci_lo > fit.adjusted[0].ci_hi - fit.adjusted[0].ci_lo);
}

TEST_CASE("adjusted-mean CI width shrinks like 1/sqrt(n)") {
  auto width = [](int per_group) {
    double w = 0;
    for (std::uint64_t seed = 50; seed < 56; ++seed) {
      const FitResult fit = fit_lmm(synth_table(seed, per_group, 0.1, 0.05));
      w += fit.adjusted[0].ci_hi - fit.adjusted[0].ci_lo;
    }
    return w / 6;
  };
  const double w4 = width(4), w16 = width(16);
  CHECK(w16 < w4 * 0.65);  // ~1/2 expected from 4x subjects
}

TEST_CASE("bartlett flags heterogeneous groups and not homogeneous ones") {
  Rng rng(3);
  std::vector<std::vector<double>> equal(3), unequal(3);
  for (int g = 0; g < 3; ++g)
    for (int i = 0; i < 20; ++i) {
      equal[static_cast<std::size_t>(g)].push_back(rng.gaussian(0, 1));
      unequal[static_cast<std::size_t>(g)].push_back(rng.gaussian(0, g == 2 ? 5.0 : 1.0));
    }
  const BartlettResult eq = bartlett(equal);
  CHECK(eq.p > 0.05);
  const BartlettResult ne = bartlett(unequal);
  CHECK(ne.p < 0.01);
  CHECK(ne.df == 2);

  // closed-form oracle for the unequal case
  {
    const int k = 3, n = 20;
    double logsum = 0, pooled = 0;
    std::vector<double> s2;
    for (const auto& g : unequal) {
      double mean = 0;
      for (double v : g) mean += v;
      mean /= n;
      double ss = 0;
      for (double v : g) ss += (v - mean) * (v - mean);
      s2.push_back(ss / (n - 1));
    }
    for (double v : s2) {
      pooled += (n - 1) * v;
      logsum += (n - 1) * std::log(v);
    }
    const double N = 3.0 * n;
    pooled /= (N - k);
    const double C = 1.0 + (3.0 / (n - 1) - 1.0 / (N - k)) / (3.0 * (k - 1));
    const double stat = ((N - k) * std::log(pooled) - logsum) / C;
    CHECK(ne.statistic == doctest::Approx(stat).epsilon(1e-12));
  }
}

TEST_CASE("bartlett statistic is exactly zero for identical groups") {
  std::vector<double> g = {1.0, 2.0, 3.0, 4.0};
  const BartlettResult r = bartlett({g, g, g});
  CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bartlett rejects degenerate groups") {
  CHECK_THROWS_AS(bartlett({{1.0}, {1.0, 2.0}}), ValidationError);
  CHECK_THROWS_AS(bartlett({{1.0, 1.0}, {1.0, 2.0}}), ValidationError);
}

TEST_CASE("qq residuals of a healthy fit stay near the diagonal") {
  const LongTable t = synth_table(61, 10, 0.1, 0.05);
  const FitResult fit = fit_lmm(t);
  const auto qq = qq_residuals(fit);
  REQUIRE(qq.size() == t.rows.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : qq) {
    sxx += p.theoretical * p.theoretical;
    syy += p.empirical * p.empirical;
    sxy += p.theoretical * p.empirical;
  }
  CHECK(sxy / std::sqrt(sxx * syy) > 0.99);
}

TEST_CASE("a single residual lands at the median quantile") {
  FitResult fit;
  fit.converged = true;
  fit.sigma2_eps = 1.0;
  fit.residuals = {0.37};
  const auto qq = qq_residuals(fit);
  REQUIRE(qq.size() == 1);
  CHECK(qq[0].theoretical == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(qq[0].empirical == doctest::Approx(0.37));
}

TEST_CASE("heavy-tailed residuals show up in the qq correlation") {
  LongTable t = synth_table(62, 10, 0.1, 0.05);
  Rng rng(5);
  for (auto& r : t.rows)
    if (rng.next_double() < 0.05) r.value += rng.gaussian(0, 1.5);  // contamination
  const FitResult clean = fit_lmm(synth_table(62, 10, 0.1, 0.05));
  const FitResult heavy = fit_lmm(t);
  auto corr = [](const std::vector<QQPoint>& qq) {
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : qq) {
      sxx += p.theoretical * p.theoretical;
      syy += p.empirical * p.empirical;
      sxy += p.theoretical * p.empirical;
    }
    return sxy / std::sqrt(sxx * syy);
  };
  CHECK(corr(qq_residuals(heavy)) < corr(qq_residuals(clean)));
}

TEST_CASE("the verdict composes its four flags per condition") {
  // strong pattern: positive means everywhere, SD flat for normal/quick,
  // SD falling under fine, PS SD rising except under fine
  LongTable am = synth_table(71, 8, 0.02, 0.01, {1, 1, 1}, {0.10, 0.10, 0.10});
  LongTable as = synth_table(72, 8, 0.002, 0.003, {0.05, 0.05, 0.05}, {-0.004, 0.0, 0.0});
  LongTable pm = synth_table(73, 8, 0.02, 0.01, {1, 1, 1}, {0.10, 0.12, 0.12});
  LongTable ps = synth_table(74, 8, 0.002, 0.003, {0.05, 0.05, 0.05}, {0.0, 0.012, 0.012});
  const TransparencyVerdict v =
      transparency_verdict(fit_lmm(am), fit_lmm(as), fit_lmm(pm), fit_lmm(ps));
  CHECK(!v.by_condition[0].transparent);
  CHECK(v.by_condition[1].transparent);
  CHECK(v.by_condition[2].transparent);
  CHECK(!v.by_condition[0].action_sd_weber_violated);
  CHECK(!v.by_condition[0].perception_sd_weber_obeyed);
}

TEST_CASE("all-zero slopes are not transparent") {
  const LongTable flat = synth_table(81, 8, 0.01, 0.02, {1, 1, 1}, {0, 0, 0});
  const FitResult f = fit_lmm(flat);
  const TransparencyVerdict v = transparency_verdict(f, f, f, f);
  for (int c = 0; c < 3; ++c) {
    CHECK(!v.by_condition[static_cast<std::size_t>(c)].transparent);
    CHECK(!v.by_condition[static_cast<std::size_t>(c)].action_mean_ok);
  }
}

TEST_CASE("distribution helpers agree with reference values") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5));
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
  CHECK(norm_quantile(norm_cdf(1.2345)) == doctest::Approx(1.2345).epsilon(1e-9));
  CHECK(t_sf(0.87, 1e7) == doctest::Approx(0.1922).epsilon(1e-3));
  CHECK(t_sf(2.86, 121) == doctest::Approx(0.00251).epsilon(0.02));
  CHECK(chi2_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(chi2_sf(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(t_quantile(0.975, 10) == doctest::Approx(2.228).epsilon(1e-3));
  CHECK(f_sf(4.0, 2, 20) == doctest::Approx(0.0347).epsilon(0.02));
}
