#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace xorreach {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent stream from a root seed. Every consumer of
/// randomness names its stream, so adding a new consumer never perturbs
/// the draws of an existing one.
inline Rng substream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  return Rng(splitmix64(splitmix64(root ^ fnv1a(name)) + index));
}

/// Uniform integer in [0, n). Portable across standard libraries, unlike
/// std::uniform_int_distribution.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

/// Keyed coin: the same (seed, key) always yields the same outcome. Used
/// for public randomness that both parties expand locally.
inline bool keyed_coin(std::uint64_t seed, std::uint64_t key, double p) {
  const std::uint64_t h = splitmix64(splitmix64(seed) ^ key);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < p;
}

}  // namespace xorreach
