#include "tgrasp/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace tgrasp {

namespace {

using cplx = std::complex<double>;

// polynomial product in powers of z^-1
std::vector<cplx> polymul(const std::vector<cplx>& p, const std::vector<cplx>& q) {
  std::vector<cplx> out(p.size() + q.size() - 1, cplx(0, 0));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  return out;
}

}  // namespace

FilterBA butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
  if (order < 2 || order % 2 != 0)
    throw ValidationError("butterworth: even order >= 2 required");
  if (!(cutoff_hz > 0) || !(fs_hz > 2 * cutoff_hz))
    throw ValidationError("butterworth: need 0 < cutoff < fs/2");

  const double wc = 2.0 * M_PI * cutoff_hz;
  const double T = 1.0 / fs_hz;
  const int n = order;

  std::vector<cplx> poles(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const double ang = M_PI * (2.0 * k + n - 1.0) / (2.0 * n);
    poles[static_cast<std::size_t>(k - 1)] = wc * std::exp(cplx(0, ang));
  }

  // residues of wc^n / prod(s - p_k)
  std::vector<cplx> residues(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    cplx denom(1, 0);
    for (int j = 0; j < n; ++j)
      if (j != k) denom *= poles[static_cast<std::size_t>(k)] - poles[static_cast<std::size_t>(j)];
    residues[static_cast<std::size_t>(k)] = std::pow(cplx(wc, 0), n) / denom;
  }

  std::vector<cplx> zpoles(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    zpoles[static_cast<std::size_t>(k)] = std::exp(poles[static_cast<std::size_t>(k)] * T);

  // a(z) = prod(1 - zp_k z^-1); b(z) = T sum_k r_k prod_{j!=k}(1 - zp_j z^-1)
  std::vector<cplx> a = {cplx(1, 0)};
  for (int k = 0; k < n; ++k) a = polymul(a, {cplx(1, 0), -zpoles[static_cast<std::size_t>(k)]});
  std::vector<cplx> b(static_cast<std::size_t>(n), cplx(0, 0));
  for (int k = 0; k < n; ++k) {
    std::vector<cplx> term = {cplx(T, 0) * residues[static_cast<std::size_t>(k)]};
    for (int j = 0; j < n; ++j)
      if (j != k) term = polymul(term, {cplx(1, 0), -zpoles[static_cast<std::size_t>(j)]});
    for (std::size_t i = 0; i < term.size(); ++i) b[i] += term[i];
  }

  FilterBA f;
  f.a.resize(static_cast<std::size_t>(n) + 1);
  f.b.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) f.a[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i)].real();
  f.b[0] = 0.0;  // impulse-invariant numerator has no z^0 term for n >= 2
  for (int i = 0; i < n; ++i) f.b[static_cast<std::size_t>(i) + 1] = b[static_cast<std::size_t>(i)].real();

  const double dc = std::accumulate(f.b.begin(), f.b.end(), 0.0) /
                    std::accumulate(f.a.begin(), f.a.end(), 0.0);
  for (double& v : f.b) v /= dc;
  return f;
}

std::vector<double> lfilter_zi(const FilterBA& f) {
  // fixed point of the DF2T state recurrence for x = 1, y = dc gain
  const std::size_t n = f.a.size() - 1;
  const double gain = std::accumulate(f.b.begin(), f.b.end(), 0.0) /
                      std::accumulate(f.a.begin(), f.a.end(), 0.0);
  std::vector<double> z(n, 0.0);
  // z[n-1] = b[n] - a[n] y ; z[i-1] = b[i] + z[i] - a[i] y
  double acc = 0.0;
  for (std::size_t i = n; i >= 1; --i) {
    acc = f.b[i] - f.a[i] * gain + acc;
    z[i - 1] = acc;
  }
  return z;
}

std::vector<double> lfilter(const FilterBA& f, const std::vector<double>& x,
                            std::vector<double> z) {
  const std::size_t n = f.a.size() - 1;
  if (z.size() != n) z.assign(n, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t m = 0; m < x.size(); ++m) {
    const double xm = x[m];
    const double ym = f.b[0] * xm + z[0];
    for (std::size_t i = 0; i + 1 < n; ++i) z[i] = f.b[i + 1] * xm + z[i + 1] - f.a[i + 1] * ym;
    z[n - 1] = f.b[n] * xm - f.a[n] * ym;
    y[m] = ym;
  }
  return y;
}

std::vector<double> filtfilt(const FilterBA& f, const std::vector<double>& x) {
  const std::size_t pad = static_cast<std::size_t>(3 * f.order());
  if (x.size() <= pad)
    throw ValidationError("filtfilt: input length " + std::to_string(x.size()) +
                          " too short for padding " + std::to_string(pad));
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x[0] - x[pad - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

  const std::vector<double> zi = lfilter_zi(f);
  auto scaled = [&](double x0) {
    std::vector<double> z = zi;
    for (double& v : z) v *= x0;
    return z;
  };
  std::vector<double> y = lfilter(f, ext, scaled(ext.front()));
  std::reverse(y.begin(), y.end());
  y = lfilter(f, y, scaled(y.front()));
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad),
          y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace tgrasp
