#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reco/linalg.hpp"
#include "reco/reco_params.hpp"
#include "reco/toy_vlm.hpp"

namespace reco::diag {

// Hellinger distance normalized to [0, 1]:
//   sqrt(max(0, 1 - Σ sqrt(p_i q_i)))
// Inputs must be non-negative and sum to 1 within 1e-9.
double hellinger(std::span<const double> p, std::span<const double> q);

struct InfluenceCurve {
  std::vector<std::size_t> steps;
  std::vector<double> hellinger;
  std::vector<std::vector<double>> per_scene;  // [scene][step]
  std::size_t scene_count = 0;
  bool reco = false;
  std::string config_fingerprint;

  // Mean of hellinger over steps in [begin, end).
  double window_mean(std::size_t begin, std::size_t end) const;
};

// Per step t, the mean over scenes of hellinger(P_with, P_without).
InfluenceCurve influence_curve(const ToyVlm& model, std::span<const SceneSpec> scenes,
                               std::span<const Token> prompt, std::size_t t_max,
                               const ReCoParams* reco = nullptr, const DecodeOptions& opts = {});

// CSV `t,hellinger` plus a `<path>.json` sidecar with run metadata.
void export_curve(const InfluenceCurve& curve, const std::filesystem::path& path);
std::string curve_csv(const InfluenceCurve& curve);
InfluenceCurve parse_curve_csv(const std::string& text);

}  // namespace reco::diag
