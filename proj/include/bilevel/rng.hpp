#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bilevel {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. All derived draws (uniform reals, bounded integers, normals)
/// are computed here rather than through <random> distributions, whose
/// algorithms differ between standard libraries.
///
/// Stream splitting: every operation that consumes randomness derives its
/// own child stream with Rng::derive(seed, tag, index), seeded with
/// splitmix64(splitmix64(seed) ^ fnv1a(tag) ^ splitmix64(index + 1)).
/// The tag names the operation; the index separates per-task streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box–Muller (one draw per call, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bilevel
