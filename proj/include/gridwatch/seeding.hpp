#pragma once

#include <cstdint>
#include <string_view>

namespace gridwatch {

// splitmix64 finalizer; the standard 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic seed stream: every randomized component draws its seed from
// the master seed, a role tag, and up to two integer coordinates.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(master ^ fnv1a64(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

}  // namespace gridwatch
