#pragma once

#include <cstdint>
#include <random>

namespace reposim {

using Rng = std::mt19937_64;

// splitmix64; used both to derive independent sub-seeds and as the stable
// hash behind feature/tile hashing (std::hash is not portable across runs).
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t seed, uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL));
}

// Deterministic sub-stream seed, e.g. per (episode, driver) or per trainer.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return mix64(base ^ mix64(stream));
}

}  // namespace reposim
