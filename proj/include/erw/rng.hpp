#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace erw {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator so it
/// plugs into <random> distributions.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      w = mix64(x);
      x += 0x9e3779b97f4a7c15ULL;
    }
    // all-zero state is absorbing; mix64 of distinct inputs cannot produce it
    // for all four words, but guard anyway.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
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

  /// Uniform double on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform double on (0, 1); safe as a log/erf argument.
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double prob) noexcept { return uniform() < prob; }

  friend bool operator==(const Rng&, const Rng&) = default;

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// Seed of the replica stream keyed by (master_seed, replica_index). It is a
/// pure function of the pair, so any replica can be regenerated in isolation
/// and scheduling order never matters.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::uint64_t replica_index) noexcept {
  return mix64(mix64(master_seed) ^ mix64(~replica_index));
}

inline Rng derive_stream(std::uint64_t master_seed,
                         std::uint64_t replica_index) noexcept {
  return Rng(derive_seed(master_seed, replica_index));
}

}  // namespace erw
