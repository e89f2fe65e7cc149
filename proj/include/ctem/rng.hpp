#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ctem/common.hpp"

namespace ctem {

constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. Distributions are implemented here rather than
// through std:: distribution objects so sequences are identical across
// standard libraries. Named substreams decouple the draw order of independent
// pipeline stages (data, init, training, evaluation).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  static Rng substream(std::uint64_t seed, std::string_view label) {
    return Rng(splitmix64(seed) ^ fnv1a64(label));
  }

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on {0, ..., n-1}, rejection sampled to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    require(n > 0, "uniform_index: n must be positive");
    const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = raw();
    while (x >= lim) x = raw();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller without caching the second value.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Vec normal_vector(int d) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  // Uniform direction on the unit sphere; zero-norm draws are redrawn.
  Vec unit_vector(int d) {
    require(d >= 1, "unit_vector: dimension must be >= 1");
    while (true) {
      Vec v = normal_vector(d);
      const double n = v.norm();
      if (n > 0.0) return v / n;
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace ctem
