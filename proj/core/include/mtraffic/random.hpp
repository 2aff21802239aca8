#pragma once

#include <cstdint>
#include <limits>

namespace mtraffic {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream key for (seed, stream index).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + kGolden));
}

/// Top 53 bits of a 64-bit word as a double in [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

/// SplitMix64 stream that can also be read at an arbitrary position, so a
/// walker's t-th draw does not depend on how many other walkers ran before it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(stream_key(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return at(counter_++); }
  constexpr double uniform() noexcept { return to_unit((*this)()); }

  /// Draw number `index` of this stream, without advancing.
  [[nodiscard]] constexpr result_type at(std::uint64_t index) const noexcept {
    return mix64(key_ + (index + 1) * kGolden);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mtraffic
