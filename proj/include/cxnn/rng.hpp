#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace cxnn {

// Portable deterministic PRNG. Dataset generation, weight initialization
// and augmentation all draw from this generator so that a fixed seed
// yields byte-identical results on every platform.
//
// Core generator: xorshift64* (Vigna), constants 12/25/27 and multiplier
// 0x2545F4914F6CDD1D. Seeding and stream derivation use the SplitMix64
// finalizer with increment 0x9E3779B97F4A7C15.

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    state_ = splitmix64(s);
    if (state_ == 0) state_ = 0x2545F4914F6CDD1DULL;
  }

  // Derives an independent stream from (seed, stream ids). Used to give
  // each (variant, fold, epoch, sample) its own generator.
  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> ids) {
    uint64_t s = seed;
    uint64_t mixed = splitmix64(s);
    for (uint64_t id : ids) {
      s = mixed ^ (id + 0x9E3779B97F4A7C15ULL);
      mixed = splitmix64(s);
    }
    return Rng(mixed);
  }

  uint64_t next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n). n must be > 0; modulo bias is irrelevant at the
  // ranges used here (n << 2^64).
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (portable, no libm distribution
  // dependence beyond sqrt/log/cos).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  bool coin() { return (next_u64() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cxnn
