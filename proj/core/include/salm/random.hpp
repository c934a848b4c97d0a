#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace salm {

using Rng = std::mt19937_64;

/// Mixes a base seed with a path of integers (epoch, example index, ...) into
/// an independent stream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t p : path) h = mix(h ^ mix(p));
  return h;
}

/// Uniform draw from [0, n). `n` must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace salm
