#include <cmath>
#include <vector>

#include "doctest.h"
#include "tgrasp/filter.hpp"
#include "tgrasp/rng.hpp"

using namespace tgrasp;

namespace {

const double kFs = 100.0;
const double kFc = 10.0;

std::vector<double> sine(double freq_hz, double seconds, double fs = kFs) {
  std::vector<double> x;
  const int n = static_cast<int>(seconds * fs);
  x.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x.push_back(std::sin(2 * M_PI * freq_hz * i / fs));
  return x;
}

// amplitude ratio measured on the middle half of the trace
double measured_gain(double freq_hz) {
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  const auto x = sine(freq_hz, 20.0);
  const auto y = filtfilt(f, x);
  double amp = 0;
  for (std::size_t i = x.size() / 4; i < 3 * x.size() / 4; ++i)
    amp = std::max(amp, std::fabs(y[i]));
  return amp;
}

// integer-lag cross correlation argmax between input and output
int xcorr_peak_lag(const std::vector<double>& x, const std::vector<double>& y, int max_lag) {
  int best_lag = 0;
  double best = -1e300;
  const int n = static_cast<int>(x.size());
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0;
    for (int i = std::max(0, -lag); i < n && i + lag < n; ++i) s += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i + lag)];
    if (s > best) {
      best = s;
      best_lag = lag;
    }
  }
  return best_lag;
}

double analytic_double_pass(double freq_hz) {
  const double r = std::pow(freq_hz / kFc, 8.0);
  return 1.0 / (1.0 + r);
}

}  // namespace

TEST_CASE("DC gain is one to 1e-9") {
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  std::vector<double> x(400, 3.7);
  const auto y = filtfilt(f, x);
  for (double v : y) REQUIRE(v == doctest::Approx(3.7).epsilon(1e-9));
}

TEST_CASE("a 20 Hz probe is attenuated by the analytic double-pass factor") {
  const double g = measured_gain(20.0);
  CHECK(g == doctest::Approx(analytic_double_pass(20.0)).epsilon(0.10));
  CHECK(g == doctest::Approx(0.0039).epsilon(0.12));
}

TEST_CASE("magnitude tracks the analog prototype through the transition band") {
  for (double fr : {1.0, 5.0, 9.0, 12.0, 15.0})
    CHECK(measured_gain(fr) == doctest::Approx(analytic_double_pass(fr)).epsilon(0.10));
}

TEST_CASE("zero phase at 1, 5 and 9 Hz") {
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  for (double fr : {1.0, 5.0, 9.0}) {
    const auto x = sine(fr, 20.0);
    const auto y = filtfilt(f, x);
    CHECK(xcorr_peak_lag(x, y, 15) == 0);
  }
}

TEST_CASE("-3 dB of the double pass sits near 9 Hz") {
  // bisect for |H|^2 = 1/sqrt(2)
  double lo = 5, hi = 15;
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (measured_gain(mid) > std::pow(2.0, -0.5))
      lo = mid;
    else
      hi = mid;
  }
  const double f3 = 0.5 * (lo + hi);
  CHECK(std::fabs(f3 - 9.0) < 0.5);
}

TEST_CASE("filter is linear to 1e-9") {
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  Rng rng(13);
  std::vector<double> a(300), b(300);
  for (auto& v : a) v = rng.gaussian(0, 1);
  for (auto& v : b) v = rng.gaussian(0, 1);
  std::vector<double> sum(300);
  for (std::size_t i = 0; i < 300; ++i) sum[i] = 2.0 * a[i] - 0.5 * b[i];
  const auto fa = filtfilt(f, a);
  const auto fb = filtfilt(f, b);
  const auto fs = filtfilt(f, sum);
  for (std::size_t i = 0; i < 300; ++i)
    REQUIRE(fs[i] == doctest::Approx(2.0 * fa[i] - 0.5 * fb[i]).epsilon(1e-9));
}

TEST_CASE("streams shorter than the padding are rejected") {
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  std::vector<double> x(12, 1.0);  // pad = 3 x order = 12 needs > 12 samples
  CHECK_THROWS_AS(filtfilt(f, x), ValidationError);
  std::vector<double> ok(13, 1.0);
  CHECK_NOTHROW(filtfilt(f, ok));
}

TEST_CASE("design rejects invalid parameters") {
  CHECK_THROWS_AS(butterworth_lowpass(3, 10, 100), ValidationError);
  CHECK_THROWS_AS(butterworth_lowpass(4, 60, 100), ValidationError);
}

TEST_CASE("single-pass filter matches its own transfer function") {
  // direct-form implementation vs the analytic rational response
  const FilterBA f = butterworth_lowpass(4, kFc, kFs);
  const double fr = 7.0;
  const auto x = sine(fr, 30.0);
  auto y = lfilter(f, x, {});
  double amp = 0;
  for (std::size_t i = x.size() / 2; i < x.size(); ++i) amp = std::max(amp, std::fabs(y[i]));
  // |H(e^{jw})| from the coefficients
  const double w = 2 * M_PI * fr / kFs;
  double br = 0, bi = 0, ar = 0, ai = 0;
  for (std::size_t k = 0; k < f.b.size(); ++k) {
    br += f.b[k] * std::cos(w * static_cast<double>(k));
    bi -= f.b[k] * std::sin(w * static_cast<double>(k));
  }
  for (std::size_t k = 0; k < f.a.size(); ++k) {
    ar += f.a[k] * std::cos(w * static_cast<double>(k));
    ai -= f.a[k] * std::sin(w * static_cast<double>(k));
  }
  const double mag = std::sqrt((br * br + bi * bi) / (ar * ar + ai * ai));
  CHECK(amp == doctest::Approx(mag).epsilon(1e-3));
}
