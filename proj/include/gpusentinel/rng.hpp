#pragma once

#include <cstdint>
#include <random>

namespace gpusentinel {

// Portable random source: std::mt19937_64 (bit-exact by the standard) with
// hand-rolled variate transforms, since the std distributions are
// implementation-defined. The identifier below is stored in trace metadata.
inline constexpr const char* kRngAlgorithm = "mt19937_64+u53+box-muller";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller; one variate per call (the sine branch is
  // discarded so the draw count per call is fixed at two).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; derives independent child seeds from a parent seed.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace gpusentinel
