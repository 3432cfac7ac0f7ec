#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "reco/cache.hpp"
#include "reco/metrics.hpp"
#include "reco/toy_vlm.hpp"

namespace reco {

inline const std::vector<Token> kDefaultPrompt = {kBos};

struct Caption {
  std::size_t scene_index = 0;
  std::vector<Token> tokens;
};

// One rollout per scene. Sampling seeds are opts.seed + scene index.
std::vector<Caption> caption_scenes(const ToyVlm& model, std::span<const SceneSpec> scenes,
                                    std::span<const Token> prompt, const DecodeOptions& opts,
                                    const ReCoParams* reco = nullptr);

// Preference records in the style of hallucination-aware DPO: the rejected
// answer is the model's own caption, the chosen answer the same caption with
// every hallucinated object replaced by a present one.
std::vector<cache::TraceRecord> synthesize_preferences(const ToyVlm& model,
                                                       std::span<const SceneSpec> scenes,
                                                       std::span<const Caption> captions,
                                                       std::span<const Token> prompt,
                                                       std::uint64_t seed);

metrics::CaptionEval caption_eval(const ToyVlm& model, const SceneSpec& scene,
                                  std::span<const Token> tokens);

}  // namespace reco
