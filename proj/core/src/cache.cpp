#include "reco/cache.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <functional>

#include "reco/error.hpp"

namespace reco::cache {

static_assert(std::endian::native == std::endian::little,
              "cache I/O assumes a little-endian host");

namespace {

constexpr std::uint32_t kMaxDim = 1u << 16;

template <typename T>
std::span<const std::byte> bytes_of(const T& v) {
  return std::as_bytes(std::span<const T, 1>(&v, 1));
}

// Cursor over a record body; every read is bounds-checked.
class BodyCursor {
 public:
  explicit BodyCursor(std::span<const std::byte> body) : body_(body) {}

  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::string str() {
    const auto n = scalar<std::uint32_t>();
    const auto b = take(n);
    return {reinterpret_cast<const char*>(b.data()), b.size()};
  }

  template <typename T>
  std::vector<T> array(std::uint64_t count) {
    if (count > body_.size() / sizeof(T)) fail(ErrorKind::Format, "array length exceeds record body");
    const auto b = take(count * sizeof(T));
    std::vector<T> out(count);
    std::memcpy(out.data(), b.data(), b.size());
    return out;
  }

  bool done() const noexcept { return pos_ == body_.size(); }

 private:
  std::span<const std::byte> take(std::uint64_t n) {
    if (n > body_.size() - pos_) fail(ErrorKind::Format, "field runs past end of record body");
    auto s = body_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::byte> body_;
  std::size_t pos_ = 0;
};

Segment decode_segment(BodyCursor& c, std::uint32_t d) {
  Segment s;
  const auto n = c.scalar<std::uint32_t>();
  s.token_ids = c.array<Token>(n);
  s.hidden_states = c.array<float>(static_cast<std::uint64_t>(n) * d);
  return s;
}

TraceRecord decode_body(std::span<const std::byte> body, std::uint32_t d) {
  BodyCursor c(body);
  TraceRecord r;
  r.d = d;
  r.example_id = c.str();
  r.source.model_name = c.str();
  r.source.tap_point = c.str();
  r.source.config_fingerprint = c.str();
  r.image_tokens = c.scalar<std::uint32_t>();
  r.image_embeddings = c.array<float>(static_cast<std::uint64_t>(r.image_tokens) * d);
  r.prompt = decode_segment(c, d);
  r.chosen = decode_segment(c, d);
  r.rejected = decode_segment(c, d);
  if (!c.done()) fail(ErrorKind::Format, "record body has trailing bytes");
  return r;
}

void append_str(std::vector<std::byte>& out, const std::string& s) {
  const auto n = static_cast<std::uint32_t>(s.size());
  const auto nb = bytes_of(n);
  out.insert(out.end(), nb.begin(), nb.end());
  const auto sb = std::as_bytes(std::span(s.data(), s.size()));
  out.insert(out.end(), sb.begin(), sb.end());
}

template <typename T>
void append_array(std::vector<std::byte>& out, const std::vector<T>& v) {
  const auto b = std::as_bytes(std::span(v));
  out.insert(out.end(), b.begin(), b.end());
}

void append_segment(std::vector<std::byte>& out, const Segment& s) {
  const auto n = static_cast<std::uint32_t>(s.token_ids.size());
  const auto nb = bytes_of(n);
  out.insert(out.end(), nb.begin(), nb.end());
  append_array(out, s.token_ids);
  append_array(out, s.hidden_states);
}

std::vector<std::byte> encode_body(const TraceRecord& r) {
  std::vector<std::byte> out;
  out.reserve(body_size(r));
  append_str(out, r.example_id);
  append_str(out, r.source.model_name);
  append_str(out, r.source.tap_point);
  append_str(out, r.source.config_fingerprint);
  const auto mb = bytes_of(r.image_tokens);
  out.insert(out.end(), mb.begin(), mb.end());
  append_array(out, r.image_embeddings);
  append_segment(out, r.prompt);
  append_segment(out, r.chosen);
  append_segment(out, r.rejected);
  return out;
}

std::array<std::byte, kHeaderBytes> encode_header(std::uint32_t d, std::uint64_t count) {
  std::array<std::byte, kHeaderBytes> h{};
  std::memcpy(h.data(), kMagic, 4);
  std::memcpy(h.data() + 4, &kVersion, 4);
  std::memcpy(h.data() + 8, &d, 4);
  std::memcpy(h.data() + 12, &kFloatWidth, 4);
  std::memcpy(h.data() + 16, &count, 8);
  return h;
}

// Random-access byte source: the file or an in-memory image.
using ReadAt = std::function<void(std::uint64_t pos, std::span<std::byte> out)>;

Header parse_header(const ReadAt& read, std::uint64_t total) {
  if (total < 4) fail(ErrorKind::Truncated, "file shorter than magic");
  std::array<std::byte, kHeaderBytes> h{};
  read(0, std::span(h).first(4));
  if (std::memcmp(h.data(), kMagic, 4) != 0) fail(ErrorKind::Format, "bad magic, expected RECO");
  if (total < 8) fail(ErrorKind::Truncated, "file shorter than header");
  read(4, std::span(h).subspan(4, 4));
  Header out;
  std::memcpy(&out.version, h.data() + 4, 4);
  if (out.version != kVersion)
    fail(ErrorKind::Version, "unsupported cache version " + std::to_string(out.version));
  if (total < kHeaderBytes + kTrailerBytes) fail(ErrorKind::Truncated, "file shorter than header");
  read(8, std::span(h).subspan(8));
  std::memcpy(&out.d, h.data() + 8, 4);
  std::memcpy(&out.float_width, h.data() + 12, 4);
  std::memcpy(&out.record_count, h.data() + 16, 8);
  if (out.float_width != kFloatWidth) fail(ErrorKind::Format, "unsupported float width");
  if (out.d < 1 || out.d > kMaxDim) fail(ErrorKind::Format, "dimension out of range");
  return out;
}

void check_framing(const ReadAt& read, std::uint64_t total, const Header& h) {
  const std::uint64_t end = total - kTrailerBytes;
  std::uint64_t pos = kHeaderBytes;
  for (std::uint64_t i = 0; i < h.record_count; ++i) {
    if (end - pos < 8) fail(ErrorKind::Truncated, "record length prefix missing");
    std::uint64_t len = 0;
    read(pos, std::as_writable_bytes(std::span(&len, 1)));
    pos += 8;
    if (len > end - pos) fail(ErrorKind::Truncated, "record body runs past end of file");
    pos += len;
  }
  if (pos != end) fail(ErrorKind::Format, "bytes between last record and trailer");
}

std::uint64_t verify_checksum(const ReadAt& read, std::uint64_t total) {
  const std::uint64_t end = total - kTrailerBytes;
  Fnv1a64 hash;
  std::vector<std::byte> buf(1 << 16);
  for (std::uint64_t pos = 0; pos < end;) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), end - pos));
    read(pos, std::span(buf).first(n));
    hash.update(std::span(buf).first(n));
    pos += n;
  }
  std::uint64_t stored = 0;
  read(end, std::as_writable_bytes(std::span(&stored, 1)));
  if (stored != hash.digest())
    fail(ErrorKind::Checksum, "stored " + to_hex(stored) + " != computed " + to_hex(hash.digest()));
  return stored;
}

void check_record_dim(const TraceRecord& r, std::uint32_t d) {
  if (r.d != d) fail(ErrorKind::DimensionMismatch, "record d differs from cache d");
}

}  // namespace

void TraceRecord::validate() const {
  require(d >= 1 && d <= kMaxDim, ErrorKind::InvalidArgument, "record d out of range");
  require(image_embeddings.size() == static_cast<std::size_t>(image_tokens) * d,
          ErrorKind::DimensionMismatch, "image embeddings must be M x d");
  for (const Segment* s : {&prompt, &chosen, &rejected}) {
    require(s->hidden_states.size() == s->token_ids.size() * d, ErrorKind::DimensionMismatch,
            "segment hidden states must be N x d");
  }
}

std::uint64_t body_size(const TraceRecord& r) {
  auto seg = [&](const Segment& s) {
    return 4 + 4 * s.token_ids.size() + 4 * s.hidden_states.size();
  };
  return 4 + r.example_id.size() + 4 + r.source.model_name.size() + 4 + r.source.tap_point.size() +
         4 + r.source.config_fingerprint.size() + 4 + 4 * r.image_embeddings.size() +
         seg(r.prompt) + seg(r.chosen) + seg(r.rejected);
}

std::vector<float> to_f32(const Matrix& m) {
  std::vector<float> out(m.data().size());
  std::transform(m.data().begin(), m.data().end(), out.begin(),
                 [](double x) { return static_cast<float>(x); });
  return out;
}

Matrix to_matrix(std::span<const float> values, std::size_t rows, std::size_t cols) {
  require(values.size() == rows * cols, ErrorKind::DimensionMismatch, "to_matrix size mismatch");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

CacheWriter::CacheWriter(const std::filesystem::path& path, std::uint32_t d,
                         std::uint64_t record_count)
    : path_(path), partial_(path.string() + ".partial"), d_(d), declared_(record_count) {
  require(d >= 1 && d <= kMaxDim, ErrorKind::InvalidArgument, "cache d out of range");
  out_.open(partial_, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorKind::Io, "cannot open cache for writing: " + path.string());
  const auto h = encode_header(d, record_count);
  put(h);
}

CacheWriter::~CacheWriter() {
  if (finished_) return;
  out_.close();
  std::error_code ec;
  std::filesystem::remove(partial_, ec);
}

void CacheWriter::put(std::span<const std::byte> bytes) {
  hash_.update(bytes);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out_) fail(ErrorKind::Io, "write failed: " + path_.string());
}

void CacheWriter::append(const TraceRecord& r) {
  require(!finished_, ErrorKind::InvalidArgument, "append after finish");
  require(written_ < declared_, ErrorKind::InvalidArgument, "more records than declared");
  r.validate();
  check_record_dim(r, d_);
  const auto body = encode_body(r);
  const std::uint64_t len = body.size();
  put(bytes_of(len));
  put(body);
  ++written_;
}

std::uint64_t CacheWriter::finish() {
  require(!finished_, ErrorKind::InvalidArgument, "finish called twice");
  require(written_ == declared_, ErrorKind::InvalidArgument, "fewer records than declared");
  const std::uint64_t sum = hash_.digest();
  out_.write(reinterpret_cast<const char*>(&sum), sizeof sum);
  out_.close();
  if (!out_) fail(ErrorKind::Io, "write failed: " + path_.string());
  std::error_code ec;
  std::filesystem::rename(partial_, path_, ec);
  if (ec) fail(ErrorKind::Io, "cannot move cache into place at " + path_.string());
  finished_ = true;
  return sum;
}

std::uint64_t write_cache(std::span<const TraceRecord> records, const std::filesystem::path& path,
                          std::uint32_t d) {
  CacheWriter w(path, d, records.size());
  for (const auto& r : records) w.append(r);
  return w.finish();
}

std::uint64_t write_cache(std::span<const TraceRecord> records, const std::filesystem::path& path) {
  require(!records.empty(), ErrorKind::InvalidArgument,
          "cannot infer d from an empty record list; pass d explicitly");
  for (const auto& r : records)
    require(r.d == records.front().d, ErrorKind::DimensionMismatch, "records disagree on d");
  return write_cache(records, path, records.front().d);
}

CacheReader::CacheReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) fail(ErrorKind::Io, "cannot open cache: " + path.string());
  std::error_code ec;
  const std::uint64_t total = std::filesystem::file_size(path, ec);
  if (ec) fail(ErrorKind::Io, "cannot stat cache: " + path.string());
  const ReadAt read = [this, total](std::uint64_t pos, std::span<std::byte> out) {
    if (pos + out.size() > total) fail(ErrorKind::Truncated, "read past end of file");
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(pos));
    in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!in_) fail(ErrorKind::Io, "read failed");
  };
  header_ = parse_header(read, total);
  check_framing(read, total, header_);
  checksum_ = verify_checksum(read, total);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kHeaderBytes));
}

std::optional<TraceRecord> CacheReader::next() {
  if (consumed_ == header_.record_count) return std::nullopt;
  std::uint64_t len = 0;
  in_.read(reinterpret_cast<char*>(&len), sizeof len);
  std::vector<std::byte> body(len);
  in_.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(len));
  if (!in_) fail(ErrorKind::Truncated, "record body truncated");
  ++consumed_;
  return decode_body(body, header_.d);
}

std::vector<TraceRecord> read_cache(const std::filesystem::path& path) {
  CacheReader reader(path);
  std::vector<TraceRecord> out;
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

std::vector<TraceRecord> decode_cache(std::span<const std::byte> bytes) {
  const std::uint64_t total = bytes.size();
  const ReadAt read = [&](std::uint64_t pos, std::span<std::byte> out) {
    if (pos > total || out.size() > total - pos) fail(ErrorKind::Truncated, "read past end");
    std::memcpy(out.data(), bytes.data() + pos, out.size());
  };
  const Header h = parse_header(read, total);
  check_framing(read, total, h);
  verify_checksum(read, total);
  std::vector<TraceRecord> out;
  std::uint64_t pos = kHeaderBytes;
  for (std::uint64_t i = 0; i < h.record_count; ++i) {
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data() + pos, 8);
    pos += 8;
    out.push_back(decode_body(bytes.subspan(pos, len), h.d));
    pos += len;
  }
  return out;
}

}  // namespace reco::cache
