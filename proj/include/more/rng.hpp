#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace more {

// Deterministic PRNG used everywhere in the project. We avoid the standard
// <random> distributions because their output is implementation-defined;
// all draws below are pinned by this file alone.
//
// Generator: xoshiro256++ seeded via splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. Two uniforms per draw, no cached spare,
  // so the stream position is a pure function of the number of calls.
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double gaussian(double mean, double std) { return mean + std * gaussian(); }

  std::vector<double> gaussians(std::size_t n, double std = 1.0) {
    std::vector<double> out(n);
    for (auto& v : out) v = gaussian(0.0, std);
    return out;
  }

  // Derives an independent seed from this stream (for spawning sub-streams).
  std::uint64_t fork_seed() { return splitmix64_once(next_u64()); }

  // In-place Fisher-Yates shuffle of an index array.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    return splitmix64_once(x);
  }

  static std::uint64_t splitmix64_once(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_[4];
};

// Stable seed derivation: mixes a base seed with stream tags so that
// per-entity streams (per transition, per episode, per network) stay
// independent and replayable.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ULL + (tag << 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a,
                                 std::uint64_t tag_b) {
  return derive_seed(derive_seed(base, tag_a), tag_b);
}

}  // namespace more
