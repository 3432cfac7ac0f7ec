#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reco/hash.hpp"
#include "reco/linalg.hpp"
#include "reco/toy_vlm.hpp"

// Offline embedding cache. Byte layout (all integers little-endian, floats
// IEEE-754 binary32 little-endian); see docs/cache_format.md.
//
//   header   "RECO" | u32 version=1 | u32 d | u32 float_width=4 | u64 count
//   record   u64 body_length | body
//   body     str example_id | str model_name | str tap_point |
//            str config_fingerprint | u32 M | f32[M*d] image embeddings |
//            segment prompt | segment chosen | segment rejected
//   segment  u32 N | u32[N] token ids | f32[N*d] hidden states
//   str      u32 byte_length | UTF-8 bytes
//   trailer  u64 FNV-1a-64 over every preceding byte of the file
namespace reco::cache {

inline constexpr char kMagic[4] = {'R', 'E', 'C', 'O'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kFloatWidth = 4;
inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::size_t kTrailerBytes = 8;

struct Segment {
  std::vector<Token> token_ids;
  std::vector<float> hidden_states;  // N x d, row-major; row i predicts token_ids[i]

  std::size_t length() const noexcept { return token_ids.size(); }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Source {
  std::string model_name;
  std::string tap_point;
  std::string config_fingerprint;
  friend bool operator==(const Source&, const Source&) = default;
};

struct TraceRecord {
  std::string example_id;
  std::uint32_t d = 0;
  std::uint32_t image_tokens = 0;  // M
  std::vector<float> image_embeddings;  // M x d, row-major
  Segment prompt;
  Segment chosen;
  Segment rejected;
  Source source;

  void validate() const;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// Size in bytes of a record body (without its u64 length prefix).
std::uint64_t body_size(const TraceRecord& r);

std::vector<float> to_f32(const Matrix& m);
Matrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols);

// Streaming writer. The record count is declared up front so the header can
// be written (and hashed) before any record.
// Bytes go to "<path>.partial", renamed onto path by finish(). An unfinished
// writer deletes its partial file.
class CacheWriter {
 public:
  CacheWriter(const std::filesystem::path& path, std::uint32_t d, std::uint64_t record_count);
  ~CacheWriter();
  CacheWriter(const CacheWriter&) = delete;
  CacheWriter& operator=(const CacheWriter&) = delete;

  void append(const TraceRecord& r);
  // Writes the trailer; returns the checksum. Throws if fewer records than
  // declared were appended.
  std::uint64_t finish();

 private:
  void put(std::span<const std::byte> bytes);

  std::filesystem::path path_;
  std::filesystem::path partial_;
  std::ofstream out_;
  std::uint32_t d_;
  std::uint64_t declared_;
  std::uint64_t written_ = 0;
  Fnv1a64 hash_;
  bool finished_ = false;
};

std::uint64_t write_cache(std::span<const TraceRecord> records, const std::filesystem::path& path,
                          std::uint32_t d);
// d taken from the first record; an empty list needs the overload above.
std::uint64_t write_cache(std::span<const TraceRecord> records, const std::filesystem::path& path);

struct Header {
  std::uint32_t version = 0;
  std::uint32_t d = 0;
  std::uint32_t float_width = 0;
  std::uint64_t record_count = 0;
};

// Opening validates magic, version, record framing and checksum; records are
// then decoded one at a time.
class CacheReader {
 public:
  explicit CacheReader(const std::filesystem::path& path);

  const Header& header() const noexcept { return header_; }
  std::uint64_t checksum() const noexcept { return checksum_; }
  std::optional<TraceRecord> next();

 private:
  std::ifstream in_;
  Header header_;
  std::uint64_t checksum_ = 0;
  std::uint64_t consumed_ = 0;
};

std::vector<TraceRecord> read_cache(const std::filesystem::path& path);

// Decode-only entry point over an in-memory image of a cache file. Used by
// the fuzz tests; same checks as CacheReader.
std::vector<TraceRecord> decode_cache(std::span<const std::byte> bytes);

}  // namespace reco::cache
