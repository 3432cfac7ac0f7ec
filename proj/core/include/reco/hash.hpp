#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace reco {

// 64-bit FNV-1a. offset basis 0xcbf29ce484222325, prime 0x100000001b3.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  void update(std::span<const std::byte> bytes) noexcept;
  void update(std::string_view s) noexcept;
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = kOffset;
};

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept;
std::string to_hex(std::uint64_t v);

}  // namespace reco
