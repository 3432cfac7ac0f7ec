#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reco/cache.hpp"
#include "reco/error.hpp"
#include "reco/hash.hpp"
#include "reco/rng.hpp"
#include "test_util.hpp"

using namespace reco;
using namespace reco::cache;
using reco::test::kind_of;

#ifndef RECO_FIXTURE_DIR
#error "RECO_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace {

std::vector<float> floats(std::size_t n, SplitMix64& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

Segment segment(std::size_t n, std::uint32_t d, SplitMix64& rng) {
  Segment s;
  for (std::size_t i = 0; i < n; ++i) s.token_ids.push_back(static_cast<Token>(rng.below(64)));
  s.hidden_states = floats(n * d, rng);
  return s;
}

TraceRecord random_record(std::uint32_t d, SplitMix64& rng) {
  TraceRecord r;
  r.example_id = "ex-" + std::to_string(rng.below(100000));
  r.d = d;
  r.image_tokens = static_cast<std::uint32_t>(1 + rng.below(5));
  r.image_embeddings = floats(r.image_tokens * d, rng);
  r.prompt = segment(rng.below(4), d, rng);
  r.chosen = segment(1 + rng.below(6), d, rng);
  r.rejected = segment(1 + rng.below(6), d, rng);
  r.source = {"toy-vlm", "tap \xce\xb1", std::string(rng.below(20), 'f')};
  return r;
}

// Test-side encoder written straight from the layout comment.
struct Encoder {
  std::vector<std::byte> out;
  template <typename T>
  void pod(T v) {
    std::byte b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    for (char c : s) out.push_back(static_cast<std::byte>(c));
  }
  void seg(const Segment& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.token_ids.size()));
    for (Token t : s.token_ids) pod<std::uint32_t>(t);
    for (float f : s.hidden_states) pod<float>(f);
  }
};

std::vector<std::byte> encode(const std::vector<TraceRecord>& recs, std::uint32_t d) {
  Encoder e;
  for (char c : std::string("RECO")) e.out.push_back(static_cast<std::byte>(c));
  e.pod<std::uint32_t>(1);
  e.pod<std::uint32_t>(d);
  e.pod<std::uint32_t>(4);
  e.pod<std::uint64_t>(recs.size());
  for (const auto& r : recs) {
    Encoder body;
    body.str(r.example_id);
    body.str(r.source.model_name);
    body.str(r.source.tap_point);
    body.str(r.source.config_fingerprint);
    body.pod<std::uint32_t>(r.image_tokens);
    for (float f : r.image_embeddings) body.pod<float>(f);
    body.seg(r.prompt);
    body.seg(r.chosen);
    body.seg(r.rejected);
    e.pod<std::uint64_t>(body.out.size());
    e.out.insert(e.out.end(), body.out.begin(), body.out.end());
  }
  e.pod<std::uint64_t>(fnv1a64(e.out));
  return e.out;
}

}  // namespace

TEST_CASE("byte length of a single small record follows the layout") {
  test::TempDir dir;
  TraceRecord r;
  r.example_id = "q1";
  r.d = 2;
  r.image_tokens = 1;
  r.image_embeddings = {0.5f, -1.0f};
  r.prompt = {{1}, {0.0f, 0.0f}};
  r.chosen = {{4, 3, 2}, {1, 2, 3, 4, 5, 6}};
  r.rejected = {{5, 3, 2}, {6, 5, 4, 3, 2, 1}};
  r.source = {"toy-vlm", "h", "abc"};
  const auto path = dir.path() / "one.reco";
  write_cache(std::vector<TraceRecord>{r}, path);

  const std::uint64_t strings = (4 + 2) + (4 + 7) + (4 + 1) + (4 + 3);
  const std::uint64_t image = 4 + 1 * 2 * 4;
  const std::uint64_t seg_prompt = 4 + 1 * 4 + 1 * 2 * 4;
  const std::uint64_t seg_answer = 4 + 3 * 4 + 3 * 2 * 4;
  const std::uint64_t body = strings + image + seg_prompt + 2 * seg_answer;
  CHECK(body_size(r) == body);
  CHECK(std::filesystem::file_size(path) == 24 + 8 + body + 8);
}

TEST_CASE("writer output equals an independent encoding") {
  test::TempDir dir;
  SplitMix64 rng(1);
  std::vector<TraceRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(random_record(3, rng));
  const auto path = dir.path() / "c.reco";
  const auto checksum = write_cache(recs, path);
  const auto bytes = test::read_bytes(path);
  CHECK(bytes == encode(recs, 3));
  std::uint64_t trailer = 0;
  std::memcpy(&trailer, bytes.data() + bytes.size() - 8, 8);
  CHECK(trailer == checksum);
}

TEST_CASE("round trip on fuzzed record sets") {
  test::TempDir dir;
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = static_cast<std::uint32_t>(1 + rng.below(8));
    std::vector<TraceRecord> recs;
    for (std::size_t i = 0; i < rng.below(6); ++i) recs.push_back(random_record(d, rng));
    const auto path = dir.path() / "f.reco";
    const auto checksum = write_cache(recs, path, d);
    CHECK(read_cache(path) == recs);
    CacheReader reader(path);
    CHECK(reader.header().record_count == recs.size());
    CHECK(reader.header().d == d);
    CHECK(reader.checksum() == checksum);
    std::size_t n = 0;
    while (auto r = reader.next()) CHECK(*r == recs[n++]);
    CHECK(n == recs.size());
    CHECK(decode_cache(test::read_bytes(path)) == recs);
  }
}

TEST_CASE("empty cache is valid") {
  test::TempDir dir;
  const auto path = dir.path() / "empty.reco";
  write_cache(std::vector<TraceRecord>{}, path, 4);
  CHECK(std::filesystem::file_size(path) == 32);
  CHECK(read_cache(path).empty());
  CHECK_THROWS_AS(write_cache(std::vector<TraceRecord>{}, path), Error);
}

TEST_CASE("writer rejects inconsistent input") {
  test::TempDir dir;
  SplitMix64 rng(3);
  auto a = random_record(2, rng), b = random_record(3, rng);
  CHECK(kind_of([&] { write_cache(std::vector<TraceRecord>{a, b}, dir.path() / "x.reco"); }) ==
        ErrorKind::DimensionMismatch);
  auto bad = random_record(2, rng);
  bad.chosen.hidden_states.pop_back();
  CHECK(kind_of([&] { write_cache(std::vector<TraceRecord>{bad}, dir.path() / "y.reco"); }) ==
        ErrorKind::DimensionMismatch);
  CacheWriter w(dir.path() / "z.reco", 2, 2);
  w.append(a);
  CHECK_THROWS_AS(w.finish(), Error);
  CHECK(kind_of([&] { write_cache(std::vector<TraceRecord>{a}, dir.path() / "no/such/dir.reco"); }) ==
        ErrorKind::Io);
}

TEST_CASE("typed read errors") {
  test::TempDir dir;
  SplitMix64 rng(4);
  std::vector<TraceRecord> recs{random_record(2, rng), random_record(2, rng)};
  const auto path = dir.path() / "c.reco";
  write_cache(recs, path);
  const auto good = test::read_bytes(path);

  CHECK(kind_of([&] { read_cache(dir.path() / "missing.reco"); }) == ErrorKind::Io);

  auto magic = good;
  magic[0] = std::byte{'X'};
  CHECK(kind_of([&] { decode_cache(magic); }) == ErrorKind::Format);

  auto version = good;
  version[4] = std::byte{2};
  CHECK(kind_of([&] { decode_cache(version); }) == ErrorKind::Version);

  auto payload = good;
  payload[60] ^= std::byte{0x01};
  CHECK(kind_of([&] { decode_cache(payload); }) == ErrorKind::Checksum);

  auto trailer = good;
  trailer.back() ^= std::byte{0x80};
  CHECK(kind_of([&] { decode_cache(trailer); }) == ErrorKind::Checksum);

  auto cut = good;
  cut.resize(good.size() - 20);
  CHECK(kind_of([&] { decode_cache(cut); }) == ErrorKind::Truncated);
}

TEST_CASE("every single-byte corruption is detected") {
  test::TempDir dir;
  SplitMix64 rng(5);
  std::vector<TraceRecord> recs{random_record(3, rng), random_record(3, rng)};
  const auto path = dir.path() / "c.reco";
  write_cache(recs, path);
  const auto good = test::read_bytes(path);
  std::size_t checksum_errors = 0;
  for (std::size_t i = 0; i < good.size(); ++i) {
    for (std::uint8_t flip : {0x01, 0x80, 0xff}) {
      auto bad = good;
      bad[i] ^= std::byte{flip};
      try {
        decode_cache(bad);
        FAIL("corruption at byte " << i << " went undetected");
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Checksum) ++checksum_errors;
      }
    }
  }
  CHECK(checksum_errors > 0);
}

TEST_CASE("reader never fails untyped on malformed input") {
  SplitMix64 rng(6);
  test::TempDir dir;
  std::vector<TraceRecord> recs{random_record(2, rng)};
  write_cache(recs, dir.path() / "c.reco");
  const auto good = test::read_bytes(dir.path() / "c.reco");

  for (std::size_t n = 0; n < good.size(); ++n) {
    std::vector<std::byte> prefix(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode_cache(prefix), Error);
  }
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::byte> junk;
    if (trial % 2 == 0) {
      junk = good;
      for (std::size_t k = 0; k < 1 + rng.below(8); ++k)
        junk[rng.below(junk.size())] = static_cast<std::byte>(rng.below(256));
    } else {
      junk.resize(rng.below(200));
      for (auto& b : junk) b = static_cast<std::byte>(rng.below(256));
      if (junk.size() >= 4 && trial % 4 == 1) std::memcpy(junk.data(), "RECO", 4);
    }
    try {
      decode_cache(junk);
    } catch (const Error&) {
    } catch (...) {
      FAIL("untyped exception on fuzz input " << trial);
    }
  }
}

TEST_CASE("exporter fixture parses with metadata preserved") {
  const std::filesystem::path dir = RECO_FIXTURE_DIR;
  std::ifstream in(dir / "exporter_mock.expected.json");
  REQUIRE(in);
  const auto expect = nlohmann::json::parse(in);
  const auto path = dir / "exporter_mock.reco";
  CHECK(std::filesystem::file_size(path) == expect["size"].get<std::size_t>());

  CacheReader reader(path);
  CHECK(to_hex(reader.checksum()) == expect["checksum"].get<std::string>());
  CHECK(reader.header().d == expect["d"].get<std::uint32_t>());

  const auto recs = read_cache(path);
  REQUIRE(recs.size() == expect["records"].size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const auto& e = expect["records"][i];
    CHECK(r.example_id == e["example_id"].get<std::string>());
    CHECK(r.source.model_name == e["model_name"].get<std::string>());
    CHECK(r.source.tap_point == e["tap_point"].get<std::string>());
    CHECK(r.source.config_fingerprint == e["config_fingerprint"].get<std::string>());
    CHECK(r.image_tokens == e["image_tokens"].get<std::uint32_t>());
    CHECK(r.image_embeddings == e["image_embeddings"].get<std::vector<float>>());
    for (const char* k : {"prompt", "chosen", "rejected"}) {
      const Segment& s = std::string(k) == "prompt" ? r.prompt : std::string(k) == "chosen" ? r.chosen : r.rejected;
      CHECK(s.token_ids == e[k]["tokens"].get<std::vector<Token>>());
      CHECK(s.hidden_states == e[k]["states"].get<std::vector<float>>());
    }
  }
}
