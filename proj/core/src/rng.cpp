#include "tgrasp/rng.hpp"

#include <cmath>

namespace tgrasp {

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

Rng Rng::fork(std::uint64_t label) const {
  std::uint64_t h = hash_combine(state_ ^ 0x6a09e667f3bcc909ULL, label);
  return Rng(h);
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  if (h == 0) h = 1469598103934665603ULL;  // FNV offset basis
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffULL;
    h *= 1099511628211ULL;  // FNV prime
  }
  return h;
}

std::uint64_t hash_str(std::uint64_t h, const char* s) {
  if (h == 0) h = 1469598103934665603ULL;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace tgrasp
