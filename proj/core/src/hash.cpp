#include "reco/hash.hpp"

#include <cstdio>

namespace reco {

void Fnv1a64::update(std::span<const std::byte> bytes) noexcept {
  for (std::byte b : bytes) {
    h_ ^= static_cast<std::uint64_t>(b);
    h_ *= kPrime;
  }
}

void Fnv1a64::update(std::string_view s) noexcept {
  update(std::as_bytes(std::span(s.data(), s.size())));
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes) noexcept {
  Fnv1a64 h;
  h.update(bytes);
  return h.digest();
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace reco
