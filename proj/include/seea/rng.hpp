#pragma once

#include <cmath>
#include <cstdint>

namespace seea {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fixed stream tags so one master seed yields independent init / shuffle /
// synthesis streams.
enum class SeedStream : uint64_t {
  kInit = 1,
  kShuffle = 2,
  kSynth = 3,
};

inline uint64_t derive_seed(uint64_t master, SeedStream stream) {
  uint64_t s = master ^ (static_cast<uint64_t>(stream) * 0xD6E8FEB86659FD93ULL);
  return splitmix64(s);
}

inline uint64_t derive_seed(uint64_t master, SeedStream stream, uint64_t index) {
  uint64_t s = derive_seed(master, stream) ^ (index * 0xA0761D6478BD642FULL);
  return splitmix64(s);
}

/// xoshiro256++, seeded via splitmix64. Self-contained so sequences do not
/// depend on the standard library implementation.
class Rng {
public:
  explicit Rng(uint64_t seed) {
    for (auto& w : s_) w = splitmix64(seed);
    has_spare_ = false;
    spare_ = 0.0;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be > 0.
  uint64_t bounded(uint64_t n) {
    // Lemire's multiply-shift; bias is negligible for our n and the result
    // stays deterministic across platforms.
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It begin, It end) {
    const auto n = static_cast<uint64_t>(end - begin);
    for (uint64_t i = n; i > 1; --i) {
      const uint64_t j = bounded(i);
      std::swap(begin[i - 1], begin[j]);
    }
  }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t s_[4];
  bool has_spare_;
  double spare_;
};

}  // namespace seea
