#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace swat {

using Rng = std::mt19937_64;

/// One step of splitmix64; a good bijective mixer for seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the child node `path` below `root` in the derivation tree:
/// child(s, k) = splitmix64(s ^ splitmix64(k)), applied along the path.
/// Trial t of stream k under root r is derive_seed(r, {k, t}).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = root;
  for (std::uint64_t k : path) s = splitmix64(s ^ splitmix64(k));
  return s;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(root, path));
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline long uniform_int(Rng& rng, long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng); }

inline double gaussian(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }

}  // namespace swat
