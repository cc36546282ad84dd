#pragma once
// Deterministic random streams keyed by (master seed, string key).
//
// Every independent unit of work (a user/pair cell, a bootstrap replicate, a
// synthetic world draw) gets its own engine seeded from a stable 64-bit mix of
// the master seed and a key, so results never depend on scheduling order.

#include <cstdint>
#include <random>
#include <string_view>

namespace polar::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view key) noexcept {
  return splitmix64(master ^ splitmix64(fnv1a64(key)));
}

inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, std::string_view key) {
  return Engine(stream_seed(master, key));
}

inline Engine make_engine(std::uint64_t master, std::uint64_t index) {
  return Engine(stream_seed(master, index));
}

// Unbiased integer in [0, n) by rejection; n must be positive.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = eng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Engine& eng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

}  // namespace polar::rng
