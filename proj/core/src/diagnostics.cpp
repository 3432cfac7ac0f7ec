#include "reco/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reco/error.hpp"
#include "reco/parallel.hpp"
#include "reco/records_io.hpp"

namespace reco::diag {

namespace {

void check_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double x : p) {
    require(x >= 0.0 && std::isfinite(x), ErrorKind::InvalidArgument,
            "probabilities must be finite and non-negative");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::InvalidArgument,
          "probabilities must sum to 1 within 1e-9");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double hellinger(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), ErrorKind::DimensionMismatch, "distributions differ in length");
  check_distribution(p);
  check_distribution(q);
  // Difference-of-roots form: exactly 0 for identical inputs, unlike 1 - BC.
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = std::sqrt(p[i]) - std::sqrt(q[i]);
    s += diff * diff;
  }
  return std::min(1.0, std::sqrt(0.5 * s));
}

double InfluenceCurve::window_mean(std::size_t begin, std::size_t end) const {
  require(begin < end && end <= hellinger.size(), ErrorKind::OutOfRange,
          "window outside the curve");
  double s = 0.0;
  for (std::size_t t = begin; t < end; ++t) s += hellinger[t];
  return s / static_cast<double>(end - begin);
}

InfluenceCurve influence_curve(const ToyVlm& model, std::span<const SceneSpec> scenes,
                               std::span<const Token> prompt, std::size_t t_max,
                               const ReCoParams* reco, const DecodeOptions& opts) {
  require(!scenes.empty(), ErrorKind::InvalidArgument, "influence curve needs at least one scene");
  InfluenceCurve curve;
  curve.scene_count = scenes.size();
  curve.reco = reco != nullptr;
  curve.config_fingerprint = model.config_fingerprint();
  curve.per_scene.assign(scenes.size(), std::vector<double>(t_max, 0.0));

  parallel_for(scenes.size(), [&](std::size_t s) {
    const auto pairs = model.dist_pair_with_without_image(scenes[s], prompt, t_max, reco, opts);
    for (std::size_t t = 0; t < pairs.size(); ++t)
      curve.per_scene[s][t] = hellinger(pairs[t].with_image, pairs[t].without_image);
  });

  curve.steps.resize(t_max);
  curve.hellinger.assign(t_max, 0.0);
  for (std::size_t t = 0; t < t_max; ++t) {
    curve.steps[t] = t;
    double sum = 0.0;
    for (std::size_t s = 0; s < scenes.size(); ++s) sum += curve.per_scene[s][t];
    curve.hellinger[t] = sum / static_cast<double>(scenes.size());
  }
  return curve;
}

std::string curve_csv(const InfluenceCurve& curve) {
  require(curve.steps.size() == curve.hellinger.size(), ErrorKind::DimensionMismatch,
          "curve steps and values differ in length");
  std::string out = "t,hellinger\n";
  for (std::size_t i = 0; i < curve.steps.size(); ++i)
    out += std::to_string(curve.steps[i]) + "," + format_double(curve.hellinger[i]) + "\n";
  return out;
}

InfluenceCurve parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "t,hellinger")
    fail(ErrorKind::Parse, "curve CSV must start with header t,hellinger");
  InfluenceCurve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorKind::Parse, "curve row without comma: " + line);
    std::size_t t = 0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + comma, t);
    if (ec != std::errc() || p != line.data() + comma)
      fail(ErrorKind::Parse, "bad step in curve row: " + line);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "bad value in curve row: " + line);
    }
    c.steps.push_back(t);
    c.hellinger.push_back(v);
  }
  return c;
}

void export_curve(const InfluenceCurve& curve, const std::filesystem::path& path) {
  const nlohmann::json meta = {{"steps", curve.steps.size()},
                               {"scenes", curve.scene_count},
                               {"reco", curve.reco},
                               {"config_fingerprint", curve.config_fingerprint},
                               {"distance", "hellinger, [0,1]-normalized"},
                               {"aggregate", "mean over scenes"}};
  write_file_atomic(path, curve_csv(curve));
  write_file_atomic(path.string() + ".json", meta.dump(2) + "\n");
}

}  // namespace reco::diag
