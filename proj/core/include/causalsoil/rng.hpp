#pragma once

#include <cstdint>
#include <random>

namespace causalsoil {

// SplitMix64 finaliser. Used to derive independent child seeds from a master
// seed so that per-field / per-tree streams do not depend on scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  return splitmix64(master ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

}  // namespace causalsoil
