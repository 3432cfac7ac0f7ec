#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reco/error.hpp"
#include "reco/toy_vlm.hpp"

namespace reco {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string config_to_json(const VlmConfig& c) {
  const json j = {
      {"d", c.d},
      {"V", c.vocab},
      {"M", c.image_tokens},
      {"n_obj", c.n_obj},
      {"gamma0", c.gamma0},
      {"rho", c.rho},
      {"seed", c.seed},
      {"jitter", c.jitter},
      {"embed_scale", c.embed_scale},
      {"object_gain", c.object_gain},
      {"filler_gain", c.filler_gain},
      {"period_gain", c.period_gain},
  };
  return j.dump();
}

VlmConfig config_from_json(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::Parse, "config is not a JSON object");
  static const std::set<std::string> known = {"d",      "V",           "M",           "n_obj",
                                              "gamma0", "rho",         "seed",        "jitter",
                                              "embed_scale", "object_gain", "filler_gain",
                                              "period_gain"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail(ErrorKind::Parse, "unknown config field '" + key + "'");
  VlmConfig c;
  take(j, "d", c.d);
  take(j, "V", c.vocab);
  take(j, "M", c.image_tokens);
  take(j, "n_obj", c.n_obj);
  take(j, "gamma0", c.gamma0);
  take(j, "rho", c.rho);
  take(j, "seed", c.seed);
  take(j, "jitter", c.jitter);
  take(j, "embed_scale", c.embed_scale);
  take(j, "object_gain", c.object_gain);
  take(j, "filler_gain", c.filler_gain);
  take(j, "period_gain", c.period_gain);
  c.validate();
  return c;
}

VlmConfig load_config(const std::filesystem::path& path) { return config_from_json(read_text(path)); }

std::vector<SceneSpec> parse_scenes(const std::string& text) {
  std::vector<SceneSpec> scenes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    const std::string where = "scene line " + std::to_string(lineno);
    if (j.is_discarded() || !j.is_object()) fail(ErrorKind::Parse, where + ": not a JSON object");
    SceneSpec s;
    try {
      s.objects = j.at("objects").get<std::vector<int>>();
      s.scene_seed = j.value("scene_seed", std::uint64_t{0});
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where + ": " + e.what());
    }
    std::sort(s.objects.begin(), s.objects.end());
    if (std::adjacent_find(s.objects.begin(), s.objects.end()) != s.objects.end())
      fail(ErrorKind::Parse, where + ": duplicate object ids");
    if (s.objects.empty()) fail(ErrorKind::Parse, where + ": empty object set");
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::vector<SceneSpec> load_scenes(const std::filesystem::path& path) {
  return parse_scenes(read_text(path));
}

std::string scenes_to_jsonl(std::span<const SceneSpec> scenes) {
  std::string out;
  for (const auto& s : scenes) {
    out += json{{"objects", s.objects}, {"scene_seed", s.scene_seed}}.dump();
    out += '\n';
  }
  return out;
}

}  // namespace reco
