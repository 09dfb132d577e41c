#pragma once

#include <cstdint>
#include <random>

namespace margjoint {

// SplitMix64: a counter-based generator (Weyl sequence + finalizer).
// Replication r of a run seeded with s uses the substream
// SplitMix64::substream(s, r), so draws for one replication do not
// depend on how many replications ran before it or on which thread
// picked it up.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Stream for one replication: the seed is mixed with the replication
  // index through the finalizer so neighbouring indices land far apart.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    std::uint64_t derived = mixer();
    derived ^= mixer() << 1;
    return SplitMix64(derived);
  }

 private:
  std::uint64_t state_;
};

// inclusive bounds
inline std::int64_t uniform_int(SplitMix64& rng, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  return dist(rng);
}

inline double standard_normal(SplitMix64& rng) {
  std::normal_distribution<double> dist;
  return dist(rng);
}

// Correlated pair (z1, z2) with standard-normal margins via the
// Cholesky factor of the 2x2 correlation matrix.
struct NormalPair {
  double first;
  double second;
};

inline NormalPair correlated_normal_pair(SplitMix64& rng, double rho) {
  std::normal_distribution<double> dist;
  const double z1 = dist(rng);
  const double z2 = dist(rng);
  return {z1, rho * z1 + std::sqrt(1.0 - rho * rho) * z2};
}

// Inverse-gamma draw with density proportional to x^-(shape+1) exp(-rate/x).
inline double inverse_gamma(SplitMix64& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0);
  return rate / dist(rng);
}

}  // namespace margjoint
