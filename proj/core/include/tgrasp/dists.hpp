#pragma once

namespace tgrasp {

// Standard normal CDF and quantile (Acklam's rational approximation with
// one Halley refinement; |error| < 1e-13 over (0,1)).
double norm_cdf(double x);
double norm_quantile(double p);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incbeta(double a, double b, double x);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

// Student t distribution with (possibly fractional) df.
double t_cdf(double t, double df);
double t_sf(double t, double df);       // P(T > t)
double t_quantile(double p, double df);

// Chi-square survival function P(X > x) with k df.
double chi2_sf(double x, double k);

// F distribution survival function.
double f_sf(double f, double df1, double df2);

}  // namespace tgrasp
