#pragma once

#include <cstdint>
#include <limits>

namespace reco {

// SplitMix64 (Steele, Lea & Flood 2014). A counter-based generator: the n-th
// output is mix(seed + n * 0x9E3779B97F4A7C15) with the constants below, so
// any language reproduces the same stream from the same seed.
//
// Derived quantities are also specified exactly:
//   uniform()   = (next() >> 11) * 2^-53            in [0, 1)
//   normal()    = Box-Muller, cos branch only, u1 = 1 - uniform()
//   below(n)    = next() % n, rejecting draws below 2^64 mod n
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kMul1 = 0xBF58476D1CE4E5B9ULL;
  static constexpr std::uint64_t kMul2 = 0x94D049BB133111EBULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += kGamma);
    z = (z ^ (z >> 30)) * kMul1;
    z = (z ^ (z >> 27)) * kMul2;
    return z ^ (z >> 31);
  }
  result_type operator()() noexcept { return next(); }

  double uniform() noexcept;
  double normal() noexcept;
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  // Independent stream for a named purpose, derived from this seed.
  static SplitMix64 derive(std::uint64_t seed, std::uint64_t stream) noexcept;

 private:
  std::uint64_t state_;
};

}  // namespace reco
