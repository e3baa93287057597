#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace sftgan {

/// SplitMix64 finalizer; the mixing primitive behind every random draw.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based stream: the n-th draw is mix(key, n), so any position can be
/// reproduced from (key, counter) alone.
class RngStream {
 public:
  constexpr explicit RngStream(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  /// Derive an independent stream from a master seed and labelled indices.
  static RngStream keyed(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
                         std::uint64_t b = 0) {
    return RngStream(hash_combine(hash_combine(hash_combine(seed, hash_string(purpose)), a), b));
  }

  std::uint64_t next_u64() { return hash_combine(key_, counter_++); }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace sftgan
