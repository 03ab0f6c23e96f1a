#pragma once

#include <cmath>
#include <cstdint>

namespace deltamap {

// Counter-based PRNG built on splitmix64. Every draw is a pure function of
// (seed, counter), so independent streams can be derived by hashing tags and
// random access per element stays reproducible regardless of evaluation
// order or threading.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t tag) {
  return splitmix64(seed ^ (0x632be59bd9b4e019ULL + tag * 0x9e3779b97f4a7c15ULL));
}

// uniform in [0,1) with 53 random bits
inline double u64_to_unit(uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Sequential generator for draw-ordered sampling.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // [0,1)
  double uniform() { return u64_to_unit(next_u64()); }
  // [lo,hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // integer in [0, n)
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  double normal() {
    // Box-Muller; u1 kept away from 0
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

// Stateless per-index standard normal draw; used for voxel noise fields so a
// single slice can be sampled identically to the full volume.
inline double counter_normal(uint64_t seed, uint64_t index) {
  uint64_t a = splitmix64(seed ^ splitmix64(2 * index + 1));
  uint64_t b = splitmix64(seed ^ splitmix64(2 * index + 2));
  double u1 = u64_to_unit(a);
  double u2 = u64_to_unit(b);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace deltamap
