#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reco/error.hpp"
#include "reco/reco_params.hpp"

namespace reco {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr int kCheckpointVersion = 1;

void write_matrix(std::ofstream& out, const Matrix& m) {
  const auto data = m.data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& in, std::size_t d) {
  Matrix m(d, d);
  auto data = m.data();
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) fail(ErrorKind::Truncated, "checkpoint payload shorter than d*d*2 doubles");
  return m;
}

}  // namespace

void save_checkpoint(const ReCoParams& p, const std::filesystem::path& path) {
  const nlohmann::json header = {
      {"format", "reco-params"}, {"version", kCheckpointVersion}, {"d", p.dim()}};
  const std::string text = header.dump();
  const std::filesystem::path partial = path.string() + ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open checkpoint for writing: " + path.string());
    const auto len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_matrix(out, p.w_text());
    write_matrix(out, p.w_image());
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot move checkpoint into place at " + path.string());
}

ReCoParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint: " + path.string());
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in) fail(ErrorKind::Truncated, "checkpoint header length missing");
  if (len > (1u << 20)) fail(ErrorKind::Format, "checkpoint header implausibly large");
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) fail(ErrorKind::Truncated, "checkpoint header truncated");

  const auto header = nlohmann::json::parse(text, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("format", "") != "reco-params")
    fail(ErrorKind::Format, "not a reco-params checkpoint");
  if (header.value("version", -1) != kCheckpointVersion)
    fail(ErrorKind::Version, "unsupported checkpoint version");
  const auto d = header.value("d", std::size_t{0});
  if (d < 1 || d > 4096) fail(ErrorKind::Format, "checkpoint dimension out of range");

  Matrix wt = read_matrix(in, d);
  Matrix wi = read_matrix(in, d);
  if (in.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::Format, "trailing bytes after checkpoint payload");
  return ReCoParams(std::move(wt), std::move(wi));
}

}  // namespace reco
