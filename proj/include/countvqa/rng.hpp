#pragma once

// Seeded randomness shared by every generator in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Standard distributions are not (their algorithms are
// implementation-defined), so bounded draws and the shuffle are written out
// here. Any implementation that reproduces mt19937_64, the rejection rule in
// uniform_below() and the Fisher-Yates loop in shuffle() will replay our
// outputs exactly.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "countvqa/hashing.hpp"

namespace countvqa {

inline constexpr std::string_view kGeneratorName = "mt19937_64+rejection+fisher-yates";

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-record sub-seed: splitmix64(seed ^ fnv1a64(key)). Draws keyed this way
/// do not depend on how records are ordered or partitioned.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept {
  return splitmix64(seed ^ fnv1a64(key));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be >= 1.
  std::uint64_t uniform_below(std::uint64_t bound) {
    // Reject the top partial block so every residue is equally likely.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
    std::uint64_t x = engine_();
    while (x > limit) x = engine_();
    return x % bound;
  }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Fair coin: the top bit of one engine output.
  bool coin() { return (engine_() >> 63) != 0; }

  /// In-place Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace countvqa
