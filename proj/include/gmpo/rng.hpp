#pragma once

#include <cstdint>
#include <random>

namespace gmpo {

// splitmix64 finalizer; stable across platforms, used both for seed
// derivation and for context-bucket hashing.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix64(base ^ 0x6a09e667f3bcc908ULL);
  s = mix64(s ^ mix64(a));
  s = mix64(s ^ mix64(b));
  s = mix64(s ^ mix64(c));
  return s;
}

// Deterministic per-purpose random stream. Each consumer owns its stream so
// collection order never changes the draws another consumer sees.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    // rejection sampling keeps the draw exactly uniform
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream layout simple
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gmpo
