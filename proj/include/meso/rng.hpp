#pragma once

// Deterministic RNG stack: splitmix64 seeding, xoshiro256++ core, and
// substreams derived from (master seed, stream index) so replicas are
// reproducible regardless of scheduling. Samplers are hand-rolled; the
// standard-library distributions are implementation-defined and would break
// bit-for-bit reproducibility of event logs.

#include <cmath>
#include <cstdint>

namespace meso::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  Xoshiro256pp() : Xoshiro256pp(0x852c1e39d9df57a1ull) {}

  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  /// Substream `stream` of a master seed; distinct streams are independent
  /// for all practical purposes.
  static Xoshiro256pp substream(std::uint64_t master_seed, std::uint64_t stream) {
    return Xoshiro256pp(master_seed + 0x9E3779B97F4A7C15ull * (stream + 1));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in (0, 1]; never returns 0, so -log(u) is always finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Exponential waiting time with the given rate (> 0).
  double exponential(double rate) { return -std::log(uniform()) / rate; }

  /// Poisson sample; Knuth's product method for small means, normal
  /// approximation with continuity correction above (tau-leap use only).
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 64.0) {
      const double limit = std::exp(-mean);
      std::int64_t k = 0;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      return k - 1;
    }
    double z = normal();
    double x = mean + std::sqrt(mean) * z + 0.5;
    return x < 0.0 ? 0 : static_cast<std::int64_t>(x);
  }

  /// Standard normal via Box-Muller on our own uniforms.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace meso::rng
