#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace divc {

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the distributions below are hand-rolled because std:: distribution
// implementations are not portable across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    // Rejection-free modulo is fine here; bias is < 2^-40 for the ranges used.
    return gen_() % n;
  }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + int(below(uint64_t(hi - lo + 1)));
  }

  bool coin(double p_true = 0.5) { return uniform01() < p_true; }

  /// Box-Muller normal deviate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0x1.0p-60) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Derive an independent stream (for per-task seeding).
  Rng fork(uint64_t salt) {
    uint64_t s = gen_();
    return Rng(s ^ (salt * 0x9E3779B97F4A7C15ull));
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace divc
