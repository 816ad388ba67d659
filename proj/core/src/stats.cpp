#include "tgrasp/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "tgrasp/dists.hpp"

namespace tgrasp {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Design {
  int n = 0, m = 0;
  static constexpr int p = 6;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> subj_of_row;
  std::vector<int> n_s;
  std::vector<Mat6> XtX_s;
  std::vector<Vec6> u_s;     // X_s^T 1
  std::vector<double> v_s;   // 1^T y_s
  Mat6 XtX = Mat6::Zero();
  Vec6 Xty = Vec6::Zero();
  double yty = 0;
};

Design build_design(const LongTable& table) {
  Design d;
  std::map<std::string, int> subj_index;
  std::map<Condition, std::set<std::string>> subj_per_cond;
  std::set<double> diameters;
  for (const auto& r : table.rows) {
    if (!subj_index.count(r.subject)) {
      const int idx = static_cast<int>(subj_index.size());
      subj_index[r.subject] = idx;
    }
    subj_per_cond[r.condition].insert(r.subject);
    diameters.insert(r.diameter_mm);
  }
  for (Condition c : {Condition::fine, Condition::normal, Condition::quick})
    if (subj_per_cond[c].size() < 2)
      throw ValidationError(std::string("fit: condition ") + to_string(c) +
                            " has fewer than 2 subjects");
  if (diameters.size() < 2) throw ValidationError("fit: need at least 2 distinct diameters");

  d.n = static_cast<int>(table.rows.size());
  d.m = static_cast<int>(subj_index.size());
  d.X.resize(d.n, 6);
  d.y.resize(d.n);
  d.subj_of_row.resize(static_cast<std::size_t>(d.n));
  d.n_s.assign(static_cast<std::size_t>(d.m), 0);
  for (int i = 0; i < d.n; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    const double dc = r.diameter_mm - table.center_mm;
    const double is_n = r.condition == Condition::normal ? 1.0 : 0.0;
    const double is_q = r.condition == Condition::quick ? 1.0 : 0.0;
    d.X(i, 0) = 1.0;
    d.X(i, 1) = is_n;
    d.X(i, 2) = is_q;
    d.X(i, 3) = dc;
    d.X(i, 4) = is_n * dc;
    d.X(i, 5) = is_q * dc;
    double v = r.value;
    if (table.log_transform) {
      if (!(v > 0))
        throw ValidationError("fit: log transform requires positive values (" + r.subject + ")");
      v = std::log(v);
    }
    d.y(i) = v;
    const int s = subj_index[r.subject];
    d.subj_of_row[static_cast<std::size_t>(i)] = s;
    d.n_s[static_cast<std::size_t>(s)] += 1;
  }

  // rank check with column names in the error
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) {
    const auto perm = qr.colsPermutation().indices();
    std::string cols;
    static const char* names[6] = {"intercept", "cond_normal", "cond_quick",
                                   "diameter",  "normal:diameter", "quick:diameter"};
    for (int i = qr.rank(); i < 6; ++i) {
      if (!cols.empty()) cols += ", ";
      cols += names[perm[i]];
    }
    throw ValidationError("fit: rank-deficient design, collinear columns: " + cols);
  }

  d.XtX_s.assign(static_cast<std::size_t>(d.m), Mat6::Zero());
  d.u_s.assign(static_cast<std::size_t>(d.m), Vec6::Zero());
  d.v_s.assign(static_cast<std::size_t>(d.m), 0.0);
  for (int i = 0; i < d.n; ++i) {
    const auto s = static_cast<std::size_t>(d.subj_of_row[static_cast<std::size_t>(i)]);
    const Vec6 xi = d.X.row(i).transpose();
    d.XtX_s[s] += xi * xi.transpose();
    d.u_s[s] += xi;
    d.v_s[s] += d.y(i);
    d.XtX += xi * xi.transpose();
    d.Xty += xi * d.y(i);
    d.yty += d.y(i) * d.y(i);
  }
  return d;
}

struct ProfiledEval {
  double f = 0;  // (n-p) log sigma2 + log|V1| + log|X'V1^-1 X|
  Vec6 beta = Vec6::Zero();
  double sigma2 = 0;  // profiled residual variance (REML divisor)
  double rVr = 0;
  Mat6 A = Mat6::Zero();  // X' V1^-1 X at unit residual variance
};

ProfiledEval eval_lambda(const Design& d, double lambda) {
  ProfiledEval e;
  Mat6 A = d.XtX;
  Vec6 b = d.Xty;
  double q = d.yty;
  double logdetV = 0;
  for (int s = 0; s < d.m; ++s) {
    const double ns = d.n_s[static_cast<std::size_t>(s)];
    const double c = lambda / (1.0 + lambda * ns);
    A -= c * d.u_s[static_cast<std::size_t>(s)] * d.u_s[static_cast<std::size_t>(s)].transpose();
    b -= c * d.u_s[static_cast<std::size_t>(s)] * d.v_s[static_cast<std::size_t>(s)];
    q -= c * d.v_s[static_cast<std::size_t>(s)] * d.v_s[static_cast<std::size_t>(s)];
    logdetV += std::log1p(lambda * ns);
  }
  Eigen::LLT<Mat6> llt(A);
  if (llt.info() != Eigen::Success) throw SimulationFault("fit: X'V^-1X not positive definite");
  e.beta = llt.solve(b);
  e.rVr = q - 2.0 * e.beta.dot(b) + e.beta.dot(A * e.beta);
  if (!(e.rVr > 0)) throw ValidationError("fit: degenerate zero residual variance");
  const int dof = d.n - Design::p;
  e.sigma2 = e.rVr / dof;
  double logdetA = 0;
  for (int i = 0; i < 6; ++i) logdetA += 2.0 * std::log(llt.matrixL()(i, i));
  e.f = dof * std::log(e.sigma2) + logdetV + logdetA;
  e.A = A;
  return e;
}

// full restricted log likelihood in theta = (sigma2_u, sigma2_eps), up to
// an additive constant; used for the Satterthwaite machinery
double reml_theta(const Design& d, double s2u, double s2e) {
  Mat6 A = Mat6::Zero();
  Vec6 b = d.Xty / s2e;
  double q = d.yty / s2e;
  double logdetV = 0;
  for (int s = 0; s < d.m; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const double ns = d.n_s[si];
    const double ds = s2e + ns * s2u;
    const double c = s2u / (s2e * ds);
    A += d.XtX_s[si] / s2e - c * d.u_s[si] * d.u_s[si].transpose();
    b -= c * d.u_s[si] * d.v_s[si];
    q -= c * d.v_s[si] * d.v_s[si];
    logdetV += (ns - 1) * std::log(s2e) + std::log(ds);
  }
  Eigen::LLT<Mat6> llt(A);
  if (llt.info() != Eigen::Success) throw SimulationFault("fit: information matrix not PD");
  const Vec6 beta = llt.solve(b);
  const double rVr = q - 2.0 * beta.dot(b) + beta.dot(A * beta);
  double logdetA = 0;
  for (int i = 0; i < 6; ++i) logdetA += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (logdetV + logdetA + rVr);
}

double contrast_var(const Design& d, const Vec6& c, double s2u, double s2e) {
  Mat6 A = Mat6::Zero();
  for (int s = 0; s < d.m; ++s) {
    const auto si = static_cast<std::size_t>(s);
    const double ns = d.n_s[si];
    const double ds = s2e + ns * s2u;
    const double w = s2u / (s2e * ds);
    A += d.XtX_s[si] / s2e - w * d.u_s[si] * d.u_s[si].transpose();
  }
  Eigen::LLT<Mat6> llt(A);
  return c.dot(llt.solve(c));
}

struct ThetaCov {
  bool valid = false;
  Eigen::Matrix2d W = Eigen::Matrix2d::Zero();
};

ThetaCov theta_covariance(const Design& d, double s2u, double s2e) {
  ThetaCov out;
  if (!(s2u > 0)) return out;  // boundary: no interior curvature
  const double hu = 1e-4 * std::max(s2u, 1e-3 * s2e);
  const double he = 1e-4 * s2e;
  if (s2u - 2 * hu <= 0) return out;
  auto f = [&](double a, double b) { return reml_theta(d, a, b); };
  Eigen::Matrix2d H;
  H(0, 0) = (f(s2u + hu, s2e) - 2 * f(s2u, s2e) + f(s2u - hu, s2e)) / (hu * hu);
  H(1, 1) = (f(s2u, s2e + he) - 2 * f(s2u, s2e) + f(s2u, s2e - he)) / (he * he);
  H(0, 1) = H(1, 0) = (f(s2u + hu, s2e + he) - f(s2u + hu, s2e - he) - f(s2u - hu, s2e + he) +
                       f(s2u - hu, s2e - he)) /
                      (4 * hu * he);
  const Eigen::Matrix2d info = -H;
  const double det = info(0, 0) * info(1, 1) - info(0, 1) * info(1, 0);
  if (!(det > 0) || !(info(0, 0) > 0)) return out;
  out.W << info(1, 1) / det, -info(0, 1) / det, -info(1, 0) / det, info(0, 0) / det;
  out.valid = true;
  return out;
}

double satterthwaite_df(const Design& d, const Vec6& c, double s2u, double s2e,
                        const ThetaCov& tc) {
  const double fallback = static_cast<double>(d.n - Design::p);
  if (!tc.valid) return fallback;
  const double hu = 1e-4 * std::max(s2u, 1e-3 * s2e);
  const double he = 1e-4 * s2e;
  const double f0 = contrast_var(d, c, s2u, s2e);
  Eigen::Vector2d g;
  g(0) = (contrast_var(d, c, s2u + hu, s2e) - contrast_var(d, c, s2u - hu, s2e)) / (2 * hu);
  g(1) = (contrast_var(d, c, s2u, s2e + he) - contrast_var(d, c, s2u, s2e - he)) / (2 * he);
  const double denom = g.dot(tc.W * g);
  if (!(denom > 0)) return fallback;
  double df = 2.0 * f0 * f0 / denom;
  return std::clamp(df, 1.0, 1e7);
}

struct Brent {
  double x = 0, fx = 0;
};

// golden-section / parabolic minimization on [lo, hi]
Brent brent_minimize(const std::function<double(double)>& f, double lo, double hi, double rtol,
                     int max_iter = 200) {
  const double gold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + gold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double e = 0, dstep = 0;
  for (int it = 0; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = rtol * std::fabs(x) + 1e-14;
    const double tol2 = 2 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool parabolic = false;
    if (std::fabs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double qd = (x - v) * (fx - fw);
      double pn = (x - v) * qd - (x - w) * r;
      qd = 2.0 * (qd - r);
      if (qd > 0) pn = -pn;
      qd = std::fabs(qd);
      const double etemp = e;
      e = dstep;
      if (std::fabs(pn) < std::fabs(0.5 * qd * etemp) && pn > qd * (a - x) && pn < qd * (b - x)) {
        dstep = pn / qd;
        const double u = x + dstep;
        if (u - a < tol2 || b - u < tol2) dstep = std::copysign(tol1, xm - x);
        parabolic = true;
      }
    }
    if (!parabolic) {
      e = (x >= xm) ? a - x : b - x;
      dstep = gold * e;
    }
    const double u = std::fabs(dstep) >= tol1 ? x + dstep : x + std::copysign(tol1, dstep);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x)
        a = x;
      else
        b = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return {x, fx};
}

}  // namespace

double reml_profile_objective(const LongTable& table, double lambda) {
  const Design d = build_design(table);
  return eval_lambda(d, lambda).f;
}

FitResult fit_lmm(const LongTable& table) {
  FitResult fit;
  fit.metric = table.metric;
  fit.statistic = table.statistic;
  fit.log_transform = table.log_transform;
  fit.center_mm = table.center_mm;

  const Design d = build_design(table);
  fit.n_rows = d.n;
  fit.n_subjects = d.m;

  auto obj = [&](double lam) { return eval_lambda(d, lam).f; };

  // coarse log-spaced sweep to bracket the minimum (lambda = s2u/s2e)
  std::vector<double> grid = {0.0};
  for (double lg = -6; lg <= 7.01; lg += 0.5) grid.push_back(std::pow(10.0, lg));
  std::size_t best = 0;
  double fbest = obj(grid[0]);
  std::vector<double> fg(grid.size());
  fg[0] = fbest;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    fg[i] = obj(grid[i]);
    if (fg[i] < fbest) {
      fbest = fg[i];
      best = i;
    }
  }

  double lambda_hat;
  if (best == 0) {
    lambda_hat = 0.0;
    fit.boundary = true;
  } else if (best + 1 == grid.size()) {
    throw SimulationFault(
        "fit: variance ratio search hit the upper bracket (lambda > 1e7); objective at "
        "bracket ends: f(" + std::to_string(grid[best - 1]) + ")=" + std::to_string(fg[best - 1]) +
        ", f(" + std::to_string(grid[best]) + ")=" + std::to_string(fg[best]));
  } else {
    const double lo = grid[best - 1], hi = grid[best + 1];
    Brent br = brent_minimize(obj, lo, hi, 1e-12);
    lambda_hat = br.x;
    // Newton polish on the finite-difference gradient; the Hessian uses a
    // wide step (it only steers), the gradient a narrow one so its own
    // truncation bias stays below the stationarity tolerance
    for (int it = 0; it < 20; ++it) {
      const double hg = 1e-4 * (1.0 + lambda_hat);
      const double hh = 1e-3 * (1.0 + lambda_hat);
      const double g = (obj(lambda_hat + hg) - obj(lambda_hat - hg)) / (2 * hg);
      const double hess =
          (obj(lambda_hat + hh) - 2 * obj(lambda_hat) + obj(lambda_hat - hh)) / (hh * hh);
      if (!(hess > 0)) break;
      double step = g / hess;
      if (!std::isfinite(step)) break;
      step = std::clamp(step, -0.25 * (1.0 + lambda_hat), 0.25 * (1.0 + lambda_hat));
      const double next = std::clamp(lambda_hat - step, lo, hi);
      if (std::fabs(next - lambda_hat) < 1e-14 * (1.0 + lambda_hat)) {
        lambda_hat = next;
        break;
      }
      lambda_hat = next;
    }
    if (lambda_hat < 1e-12) {
      lambda_hat = 0.0;
      fit.boundary = true;
    }
  }

  const ProfiledEval e = eval_lambda(d, lambda_hat);
  fit.lambda = lambda_hat;
  fit.sigma2_eps = e.sigma2;
  fit.sigma2_u = lambda_hat * e.sigma2;
  fit.reml_objective = e.f;
  {
    // the objective carries ~1e-11 of arithmetic noise per evaluation, so
    // the step must stay well above the finite-difference noise floor
    const double h = 1e-4 * (1.0 + lambda_hat);
    fit.reml_gradient = lambda_hat > 0
                            ? (obj(lambda_hat + h) - obj(lambda_hat - h)) / (2 * h)
                            : (obj(h) - obj(0.0)) / h;  // one-sided at the boundary
  }

  const Mat6 cov = e.sigma2 * e.A.llt().solve(Mat6::Identity());
  for (int i = 0; i < 6; ++i) {
    fit.beta[static_cast<std::size_t>(i)] = e.beta(i);
    fit.se[static_cast<std::size_t>(i)] = std::sqrt(cov(i, i));
    for (int j = 0; j < 6; ++j) fit.cov[static_cast<std::size_t>(6 * i + j)] = cov(i, j);
  }

  const ThetaCov tc = theta_covariance(d, fit.sigma2_u, fit.sigma2_eps);
  auto make_contrast = [](std::initializer_list<int> idx) {
    Vec6 c = Vec6::Zero();
    for (int i : idx) c(i) = 1.0;
    return c;
  };
  const std::array<Vec6, 3> slope_c = {make_contrast({3}), make_contrast({3, 4}),
                                       make_contrast({3, 5})};
  const std::array<Vec6, 3> mean_c = {make_contrast({0}), make_contrast({0, 1}),
                                      make_contrast({0, 2})};
  for (int c = 0; c < 3; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    SlopeInfo& s = fit.slopes[ci];
    s.estimate = slope_c[ci].dot(e.beta);
    s.se = std::sqrt(slope_c[ci].dot(cov * slope_c[ci]));
    s.df = satterthwaite_df(d, slope_c[ci], fit.sigma2_u, fit.sigma2_eps, tc);
    s.t = s.estimate / s.se;
    s.p_two = 2.0 * t_sf(std::fabs(s.t), s.df);

    AdjustedMean& am = fit.adjusted[ci];
    am.estimate = mean_c[ci].dot(e.beta);
    am.se = std::sqrt(mean_c[ci].dot(cov * mean_c[ci]));
    am.df = satterthwaite_df(d, mean_c[ci], fit.sigma2_u, fit.sigma2_eps, tc);
    const double tq = t_quantile(0.975, am.df);
    am.ci_lo = am.estimate - tq * am.se;
    am.ci_hi = am.estimate + tq * am.se;
  }

  // omnibus F tests with Satterthwaite denominator df combined across the
  // eigen-contrasts of the hypothesis
  auto omnibus = [&](const std::vector<int>& idx) {
    OmnibusF out;
    const int q = static_cast<int>(idx.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, 6);
    for (int i = 0; i < q; ++i) L(i, idx[static_cast<std::size_t>(i)]) = 1.0;
    Eigen::VectorXd lb = L * Eigen::Map<const Eigen::Matrix<double, 6, 1>>(fit.beta.data());
    Eigen::MatrixXd M = L * cov * L.transpose();
    out.F = lb.dot(M.llt().solve(lb)) / q;
    out.df1 = q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    double E = 0;
    int used = 0;
    for (int i = 0; i < q; ++i) {
      const Vec6 ci = (es.eigenvectors().col(i).transpose() * L).transpose();
      const double nu = satterthwaite_df(d, ci, fit.sigma2_u, fit.sigma2_eps, tc);
      if (nu > 2) {
        E += nu / (nu - 2);
        ++used;
      }
    }
    if (used == q && E > q)
      out.df2 = 2.0 * E / (E - q);
    else
      out.df2 = static_cast<double>(d.n - Design::p);
    out.p = f_sf(out.F, out.df1, out.df2);
    return out;
  };
  fit.f_condition = omnibus({1, 2});
  fit.f_diameter = omnibus({3});
  fit.f_interaction = omnibus({4, 5});

  // conditional residuals: r - u_hat per subject
  fit.residuals.resize(static_cast<std::size_t>(d.n));
  std::vector<double> ssum(static_cast<std::size_t>(d.m), 0.0);
  Eigen::VectorXd marg = d.y - d.X * e.beta;
  for (int i = 0; i < d.n; ++i)
    ssum[static_cast<std::size_t>(d.subj_of_row[static_cast<std::size_t>(i)])] += marg(i);
  for (int i = 0; i < d.n; ++i) {
    const auto s = static_cast<std::size_t>(d.subj_of_row[static_cast<std::size_t>(i)]);
    const double ns = d.n_s[s];
    const double u_hat = lambda_hat / (1.0 + lambda_hat * ns) * ssum[s];
    fit.residuals[static_cast<std::size_t>(i)] = marg(i) - u_hat;
  }

  fit.converged = true;
  return fit;
}

TwoStageResult two_stage_ols(const LongTable& table) {
  TwoStageResult out;
  struct Acc {
    std::vector<double> dc, y;
    Condition cond;
  };
  std::map<std::string, Acc> per_subject;
  for (const auto& r : table.rows) {
    auto& a = per_subject[r.subject];
    a.cond = r.condition;
    a.dc.push_back(r.diameter_mm - table.center_mm);
    double v = r.value;
    if (table.log_transform) {
      if (!(v > 0)) throw ValidationError("two-stage: log transform requires positive values");
      v = std::log(v);
    }
    a.y.push_back(v);
  }
  std::array<std::vector<double>, 3> slopes, centers;
  for (const auto& [id, a] : per_subject) {
    const int n = static_cast<int>(a.dc.size());
    double dbar = 0, ybar = 0;
    for (int i = 0; i < n; ++i) {
      dbar += a.dc[static_cast<std::size_t>(i)];
      ybar += a.y[static_cast<std::size_t>(i)];
    }
    dbar /= n;
    ybar /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const double dx = a.dc[static_cast<std::size_t>(i)] - dbar;
      sxx += dx * dx;
      sxy += dx * (a.y[static_cast<std::size_t>(i)] - ybar);
    }
    if (sxx <= 0) {
      out.warnings.push_back("subject " + id + " dropped: fewer than 2 distinct diameters");
      continue;
    }
    const double slope = sxy / sxx;
    const double intercept_at_center = ybar - slope * dbar;
    out.subjects.push_back({id, a.cond, slope, intercept_at_center});
    const auto ci = static_cast<std::size_t>(a.cond);
    slopes[ci].push_back(slope);
    centers[ci].push_back(intercept_at_center);
  }
  for (int c = 0; c < 3; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    TwoStageCondition& tc = out.by_condition[ci];
    const auto& v = slopes[ci];
    tc.n_subjects = static_cast<int>(v.size());
    if (v.empty()) continue;
    double mean = 0;
    for (double s : v) mean += s;
    mean /= static_cast<double>(v.size());
    tc.mean_slope = mean;
    double mc = 0;
    for (double s : centers[ci]) mc += s;
    tc.mean_center = mc / static_cast<double>(centers[ci].size());
    if (v.size() >= 2) {
      double ss = 0;
      for (double s : v) ss += (s - mean) * (s - mean);
      tc.sd_slope = std::sqrt(ss / (static_cast<double>(v.size()) - 1));
      tc.df = static_cast<double>(v.size()) - 1;
      const double se = tc.sd_slope / std::sqrt(static_cast<double>(v.size()));
      tc.t = se > 0 ? mean / se : (mean == 0 ? 0.0 : std::copysign(HUGE_VAL, mean));
      tc.p_two = std::isinf(tc.t) ? 0.0 : 2.0 * t_sf(std::fabs(tc.t), tc.df);
    }
  }
  return out;
}

std::array<SlopeTest, 3> slope_tests(const FitResult& fit, const std::array<int, 3>& directions) {
  if (!fit.converged) throw ValidationError("slope_tests: fit did not converge");
  std::array<SlopeTest, 3> out;
  for (std::size_t c = 0; c < 3; ++c) {
    const SlopeInfo& s = fit.slopes[c];
    SlopeTest& t = out[c];
    t.estimate = s.estimate;
    t.se = s.se;
    t.t = s.t;
    t.df = s.df;
    t.direction = directions[c];
    t.p = directions[c] >= 0 ? t_sf(s.t, s.df) : t_cdf(s.t, s.df);
    t.p_two = s.p_two;
  }
  return out;
}

std::array<AdjustedMean, 3> adjusted_means(const FitResult& fit, double alpha) {
  if (!fit.converged) throw ValidationError("adjusted_means: fit did not converge");
  std::array<AdjustedMean, 3> out = fit.adjusted;
  if (alpha != 0.05) {
    for (auto& am : out) {
      const double tq = t_quantile(1.0 - alpha / 2.0, am.df);
      am.ci_lo = am.estimate - tq * am.se;
      am.ci_hi = am.estimate + tq * am.se;
    }
  }
  return out;
}

BartlettResult bartlett(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw ValidationError("bartlett: need at least 2 groups");
  double N = 0, pooled = 0, sum_log = 0, sum_inv = 0;
  for (const auto& g : groups) {
    const int n = static_cast<int>(g.size());
    if (n < 2) throw ValidationError("bartlett: every group needs n >= 2");
    double mean = 0;
    for (double v : g) mean += v;
    mean /= n;
    double ss = 0;
    for (double v : g) ss += (v - mean) * (v - mean);
    const double s2 = ss / (n - 1);
    if (!(s2 > 0)) throw ValidationError("bartlett: zero variance group");
    N += n;
    pooled += (n - 1) * s2;
    sum_log += (n - 1) * std::log(s2);
    sum_inv += 1.0 / (n - 1);
  }
  const double df_pool = N - k;
  pooled /= df_pool;
  const double C = 1.0 + (sum_inv - 1.0 / df_pool) / (3.0 * (k - 1));
  BartlettResult r;
  r.statistic = (df_pool * std::log(pooled) - sum_log) / C;
  r.df = k - 1;
  r.p = chi2_sf(r.statistic, r.df);
  return r;
}

std::vector<QQPoint> qq_residuals(const FitResult& fit) {
  if (!fit.converged) throw ValidationError("qq_residuals: fit did not converge");
  std::vector<double> r = fit.residuals;
  std::sort(r.begin(), r.end());
  const double sd = std::sqrt(fit.sigma2_eps);
  const std::size_t n = r.size();
  std::vector<QQPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].theoretical = norm_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    out[i].empirical = r[i] / sd;
  }
  return out;
}

TransparencyVerdict transparency_verdict(const FitResult& action_mean, const FitResult& action_sd,
                                         const FitResult& perception_mean,
                                         const FitResult& perception_sd, double alpha) {
  for (const FitResult* f : {&action_mean, &action_sd, &perception_mean, &perception_sd})
    if (!f->converged) throw ValidationError("verdict: all four fits must converge");
  TransparencyVerdict v;
  v.alpha = alpha;
  const auto am = slope_tests(action_mean, {+1, +1, +1});
  const auto as = slope_tests(action_sd, {-1, -1, -1});
  const auto pm = slope_tests(perception_mean, {+1, +1, +1});
  const auto ps = slope_tests(perception_sd, {+1, +1, +1});
  for (std::size_t c = 0; c < 3; ++c) {
    ConditionVerdict& cv = v.by_condition[c];
    cv.action_mean_slope = am[c].estimate;
    cv.action_mean_p = am[c].p;
    cv.action_mean_ok = am[c].estimate > 0 && am[c].p < alpha;
    cv.action_sd_slope = as[c].estimate;
    cv.action_sd_p_two = as[c].p_two;
    cv.action_sd_p_neg = as[c].p;
    cv.action_sd_weber_violated = as[c].p_two >= alpha;
    cv.perception_mean_slope = pm[c].estimate;
    cv.perception_mean_p = pm[c].p;
    cv.perception_mean_ok = pm[c].estimate > 0 && pm[c].p < alpha;
    cv.perception_sd_slope = ps[c].estimate;
    cv.perception_sd_p = ps[c].p;
    cv.perception_sd_weber_obeyed = ps[c].estimate > 0 && ps[c].p < alpha;
    cv.transparent = cv.action_mean_ok && cv.action_sd_weber_violated && cv.perception_mean_ok &&
                     cv.perception_sd_weber_obeyed;
  }
  return v;
}

}  // namespace tgrasp
