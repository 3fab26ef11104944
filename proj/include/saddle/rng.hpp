#pragma once

// Deterministic random streams. One 64-bit master seed fans out into named
// substreams ("coin", "sample", "noise") via label hashing, so that two runs
// sharing a master seed consume identical draws stream-by-stream even when
// their control flow differs elsewhere. All generation is hand-rolled
// (SplitMix64 core, Lemire bounded ints, Marsaglia polar normals) so traces
// do not depend on the standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <string_view>

#include "saddle/types.hpp"

namespace saddle {

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream seed = a few SplitMix64 rounds over master ^ hash(label).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t s = master ^ fnv1a64(label);
  splitmix64(s);
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // unbiased integer in [0, n) (Lemire multiply-shift with rejection)
  std::uint64_t uniform_index(std::uint64_t n) {
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // standard normal, Marsaglia polar method (second deviate cached)
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  Vec gaussian_vec(Eigen::Index n) {
    Vec out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = gaussian();
    return out;
  }

private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// The three substreams every trajectory owns. Coin flips, data minibatch
// draws and synthetic gradient noise never share a stream, which is what
// makes paired algorithm comparisons consume identical samples.
struct RngStreams {
  Rng coin;
  Rng sample;
  Rng noise;

  explicit RngStreams(std::uint64_t master_seed = 0)
      : coin(derive_seed(master_seed, "coin")),
        sample(derive_seed(master_seed, "sample")),
        noise(derive_seed(master_seed, "noise")) {}
};

} // namespace saddle
