#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spde2d {

// Counter-based generator: every draw is addressed by (key, counter), so
// streams can be evaluated in any order on any number of threads and still
// produce identical output.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed for replication `rep` of a run keyed by `master`.
inline std::uint64_t rep_seed(std::uint64_t master, std::uint64_t rep) {
  return splitmix64(master ^ splitmix64(rep + 1));
}

struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter c, Key k) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }
};

inline Philox4x32::Key philox_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

// Uniform in (0,1) from 53 random bits; never returns 0 or 1.
inline double uniform53(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t v = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(v) + 0.5) * 0x1.0p-53;
}

// Two independent standard normals addressed by (seed, a, b, c, tag).
inline void normal_pair(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c,
                        std::uint32_t tag, double& z0, double& z1) {
  const auto out = Philox4x32::block({a, b, c, tag}, philox_key(seed));
  const double u1 = uniform53(out[0], out[1]);
  const double u2 = uniform53(out[2], out[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 6.283185307179586476925286766559 * u2;
  z0 = rad * std::cos(ang);
  z1 = rad * std::sin(ang);
}

}  // namespace spde2d
