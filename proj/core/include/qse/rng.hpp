#pragma once

#include <cstdint>
#include <random>

namespace qse {

// splitmix64 step. Used to derive independent substreams from one 64-bit
// seed so that parallel sweep cells stay reproducible regardless of
// scheduling order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives a child seed from (seed, stream). Each (seed, stream) pair gives a
// fixed value, so substream k of a run can be recreated in isolation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ull;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x632be59bd9b4e019ull);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

// Samples an index from a discrete distribution given as a probability row.
template <typename Derived>
int sample_index(const Derived& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  int last = 0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    acc += probs[i];
    last = i;
    if (u <= acc) return i;
  }
  return last;  // guard against rounding at the top of the cdf
}

}  // namespace qse
