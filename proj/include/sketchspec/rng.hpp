#pragma once

// Counter-based random stream.
//
// The i-th word (i = 0, 1, ...) of a stream with key k is
//
//     mix64(k + (i + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. Only 64-bit integer arithmetic is
// involved, so word sequences are identical on every platform. Independent
// child streams are obtained with split(), which hashes (key, stream id) into a
// fresh key.
//
// Derived values:
//   * uniform double in [0,1): top 53 bits of a word times 2^-53
//   * sign: one bit per entry, 64 entries per word, least significant bit first
//   * standard normal: Box-Muller on two consecutive uniforms (u1 in (0,1]);
//     both outputs of a pair are used, cosine branch first

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sketchspec {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x5EED5EED5EED5EEDULL)) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform in [0, 1).
  double next_unit() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double next_open_unit() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_gaussian() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_open_unit();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Independent child stream; does not advance this stream.
  Rng split(std::uint64_t stream) const noexcept {
    Rng child(0);
    child.key_ = mix64(key_ ^ mix64(stream + kGolden));
    return child;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sketchspec
