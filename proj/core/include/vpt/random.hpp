#pragma once

#include <cstdint>
#include <random>

namespace vpt {

/// Engine used for every stochastic operation. Its output sequence is fixed by
/// the standard, so seeded runs are reproducible across toolchains.
using Rng = std::mt19937_64;

/// Uniform draw on [0, 1) built from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

/// Standard normal draw (Box-Muller, one output per call).
double standard_normal(Rng& rng);

inline double normal(Rng& rng, double mean, double sd) {
  return mean + sd * standard_normal(rng);
}

/// SplitMix64 finalizer; used to derive independent child seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(mix_seed(master) ^ a) ^ b) ^ c);
}

}  // namespace vpt
