#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eqlab {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based stream: the i-th draw is a pure function of (key, i), so a
// path's randomness depends only on (seed, path, stream) and never on which
// thread runs it.
class Rng {
 public:
  Rng() = default;
  Rng(std::uint64_t seed, std::uint64_t path, std::uint64_t stream = 0) noexcept
      : key_(splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) ^ splitmix64(path + 0x3c6ef372fe94f82bULL)) ^
             splitmix64(stream * 0xa54ff53a5f1d36f1ULL + 1)) {}

  std::uint64_t next_u64() noexcept {
    std::uint64_t x = key_ + (ctr_++) * 0xd1342543de82ef95ULL;
    x = (x ^ (x >> 32)) * 0xdaba0b6eb09322e3ULL;
    x = (x ^ (x >> 29)) * 0x9fb21c651e98df25ULL;
    return splitmix64(x ^ (x >> 32));
  }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    std::uint64_t limit = -n % n;
    for (;;) {
      std::uint64_t r = next_u64();
      unsigned __int128 m = static_cast<unsigned __int128>(r) * n;
      if (static_cast<std::uint64_t>(m) >= limit) return static_cast<std::uint64_t>(m >> 64);
    }
  }
  double normal() noexcept {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::uint64_t counter() const noexcept { return ctr_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

}  // namespace eqlab
