#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ncc {

// splitmix64. Self-contained so that identical (spec, seed) pairs produce
// byte-identical output on every platform; the standard library distributions
// do not guarantee that.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Lemire's multiply-shift, unbiased.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    uint64_t low = static_cast<uint64_t>(m);
    if (low < n) {
      const uint64_t threshold = (0ULL - n) % n;
      while (low < threshold) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
  }

  double normal(double mean, double sd) {
    // Box-Muller; one value per call keeps the stream position predictable.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586 * u2);
  }

  // Knuth's method; means in this engine are small (events per year).
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit && k < 10000);
    return k - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Independent substream keyed by a label; used so per-case / per-patient
// draws do not depend on iteration order.
inline Rng substream(uint64_t master_seed, std::string_view label) {
  return Rng(master_seed ^ (fnv1a64(label) | 1ULL));
}

}  // namespace ncc
