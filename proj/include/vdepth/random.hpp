#pragma once

#include <cstdint>
#include <vector>

namespace vdepth {

// Deterministic PRNG: xoshiro256++ seeded through splitmix64.
// Every stochastic operation in the project takes an explicit seed and
// draws through this generator, so identical seeds reproduce runs
// bit-for-bit on a given build.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (caches the spare draw).
  double normal();

  // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
  int64_t uniform_int(int64_t lo, int64_t hi);

  // k distinct values from {0..n-1}, uniformly, returned sorted ascending.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable derivation of per-stream seeds (steps, fragments, ensemble members)
// from one base seed.
uint64_t derive_seed(uint64_t base, uint64_t stream);

}  // namespace vdepth
