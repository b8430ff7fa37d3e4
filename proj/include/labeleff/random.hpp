#pragma once

#include <cstdint>
#include <random>

namespace labeleff {

/// Label bits and expert advice are stored as 0/1 bytes.
using Bit = std::uint8_t;

/// SplitMix64 finalizer, used to derive well-separated seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of run `run` under `base_seed`. Distinct
/// (run, stream) pairs map to unrelated generator states.
constexpr std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t run,
                                    std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(base_seed) ^ run) + stream);
}

/// A seeded uniform stream. Uniforms are built from the top 53 bits of
/// mt19937_64 so draws are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// One Bernoulli(p) draw; always consumes exactly one variate.
  Bit bernoulli(double p) { return uniform() < p ? 1 : 0; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace labeleff
