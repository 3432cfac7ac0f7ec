#include "reco/records_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reco/error.hpp"

namespace reco {

namespace {

using nlohmann::json;

// Calls fn(parsed object, "what line n") for every non-blank line.
template <typename Fn>
void for_each_json_line(const std::string& text, const char* what, Fn fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = std::string(what) + " line " + std::to_string(lineno);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorKind::Parse, where + ": not a JSON object");
    try {
      fn(j, where);
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where + ": " + e.what());
    }
  }
}

}  // namespace

std::string captions_to_jsonl(std::span<const Caption> captions) {
  std::string out;
  for (const auto& c : captions) {
    out += json{{"scene", c.scene_index}, {"tokens", c.tokens}}.dump();
    out += '\n';
  }
  return out;
}

std::vector<Caption> parse_captions(const std::string& text) {
  std::vector<Caption> out;
  for_each_json_line(text, "caption", [&](const json& j, const std::string&) {
    out.push_back({j.at("scene").get<std::size_t>(), j.at("tokens").get<std::vector<Token>>()});
  });
  return out;
}

std::vector<Caption> load_captions(const std::filesystem::path& path) {
  return parse_captions(read_text_file(path));
}

metrics::BinaryEval parse_binary_items(const std::string& text) {
  metrics::BinaryEval eval;
  for_each_json_line(text, "probe", [&](const json& j, const std::string& where) {
    metrics::BinaryItem item;
    item.predicted = metrics::parse_answer(j.at("answer").get<std::string>());
    const auto label = metrics::parse_answer(j.at("label").get<std::string>());
    if (label == metrics::Answer::Unparseable)
      fail(ErrorKind::Parse, where + ": label must be yes or no");
    item.label_yes = label == metrics::Answer::Yes;
    if (j.contains("pair")) item.pair_id = j.at("pair").get<std::string>();
    eval.items.push_back(std::move(item));
  });
  return eval;
}

metrics::BinaryEval load_binary_items(const std::filesystem::path& path) {
  return parse_binary_items(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) fail(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

}  // namespace reco
