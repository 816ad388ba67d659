#pragma once

#include <cstdint>
#include <vector>

namespace tgrasp {

// SplitMix64: 64-bit state, splittable by hashing a label into a child
// seed. All randomness in the simulator flows through this generator so
// that results are bit-identical across platforms and worker counts
// (std::* distributions are not portable across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // unbiased uniform integer in [0, n) by rejection
  std::uint64_t next_below(std::uint64_t n);

  // standard normal via Marsaglia polar method (one value cached)
  double gaussian();
  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  bool bernoulli(double p) { return next_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Deterministic child generator: mixes the label into the current seed
  // without consuming state, so sibling streams are independent of the
  // order in which they are created.
  Rng fork(std::uint64_t label) const;

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// FNV-1a, used for deriving per-trial seeds and for config hashing.
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);
std::uint64_t hash_str(std::uint64_t h, const char* s);

}  // namespace tgrasp
