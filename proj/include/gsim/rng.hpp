#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

// Deterministic random streams. Everything that draws randomness in this
// library goes through Rng so that datasets, trials and trajectories are
// bit-reproducible across platforms (std::normal_distribution and friends
// are implementation-defined, so we roll the few distributions we need).

namespace gsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// xoshiro256++ core, seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) {
      s = splitmix64(s);
      w = s;
      s += 0x9e3779b97f4a7c15ull;
    }
  }

  // Derived stream keyed by up to three indices (trial, node, ...).
  static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(a ^ 0x9e3779b97f4a7c15ull));
    h = splitmix64(h ^ splitmix64(b ^ 0xbf58476d1ce4e5b9ull));
    h = splitmix64(h ^ splitmix64(c ^ 0x94d049bb133111ebull));
    return Rng(h);
  }

  std::uint64_t next() {
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

  // Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (no caching, two uniforms per draw).
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Uniform index in [0, bound) via 128-bit multiply.
  std::size_t index(std::size_t bound) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

}  // namespace gsim
