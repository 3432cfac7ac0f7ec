#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reco {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  OutOfRange,
  Format,      // wrong magic or malformed structure
  Version,     // unsupported format version
  Checksum,    // payload checksum mismatch
  Truncated,   // input ended early
  Io,
  Parse,       // malformed JSON / JSONL / CSV input
  UndefinedScore,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (and the
// CLI's exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, ErrorKind kind, const char* what) {
  if (!ok) fail(kind, what);
}

}  // namespace reco
