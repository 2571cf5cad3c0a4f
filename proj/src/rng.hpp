#pragma once

#include <cstdint>
#include <random>

namespace pgrpo {

// Stateless 64-bit mixer used to derive independent RNG substreams from a
// (seed, label, index...) tuple. Substreams keep results identical no matter
// how work is scheduled.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + splitmix64(b)));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream_id) {
  return std::mt19937_64(mix_seed(seed, stream_id));
}

inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream_id,
                                 std::uint64_t index) {
  return std::mt19937_64(mix_seed(seed, stream_id, index));
}

}  // namespace pgrpo
