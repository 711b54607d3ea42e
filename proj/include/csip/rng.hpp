#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace csip {

/// splitmix64 (Vigna 2015). Used to expand a 64-bit seed into generator
/// state and as the stable per-codepoint hash in the tokenizer.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Stable 64-bit mix of a single value (one splitmix64 step from that state).
inline std::uint64_t mix64(std::uint64_t x) { return SplitMix64(x).next(); }

/// xoshiro256** seeded through splitmix64. `stream` selects a decorrelated
/// substream of the same seed; (seed, stream) fully determines the sequence.
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed, std::uint64_t stream = 0) {
    SplitMix64 base(seed);
    SplitMix64 g(base.next() + 0x9E3779B97F4A7C15ULL * stream);
    for (auto& w : s_) w = g.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  /// Unbiased integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_;
};

/// Fixed substream offsets so one run seed fans out into independent
/// generators for initialization, batch shuffling, replay shuffling and
/// dropout masks.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kReplayShuffle = 3;
inline constexpr std::uint64_t kDropout = 4;
}  // namespace stream

}  // namespace csip
