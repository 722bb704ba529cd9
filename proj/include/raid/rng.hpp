#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness helpers. The engine (std::mt19937_64) is bit-exact across
// platforms by the standard; the distributions here are hand-rolled because the
// standard library ones are implementation-defined, which would break the
// byte-identical rerun guarantees.
namespace raid::rng {

using Engine = std::mt19937_64;

// Derives an independent stream from a base seed and a stream tag, so that
// consumers (negative sampling, shuffling, support selection, ...) cannot
// perturb each other's draws.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1).
inline double uniform(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
inline std::uint64_t uniform_int(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = eng();
  while (x >= limit) x = eng();
  return x % n;
}

// Standard normal via Box-Muller. Two draws per call, no cached state.
inline double gaussian(Engine& eng) {
  const double u1 = 1.0 - uniform(eng);  // (0, 1]
  const double u2 = uniform(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_int(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace raid::rng
