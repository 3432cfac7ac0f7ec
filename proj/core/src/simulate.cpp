#include "reco/simulate.hpp"

#include <algorithm>

#include "reco/error.hpp"
#include "reco/parallel.hpp"
#include "reco/preference.hpp"

namespace reco {

std::vector<Caption> caption_scenes(const ToyVlm& model, std::span<const SceneSpec> scenes,
                                    std::span<const Token> prompt, const DecodeOptions& opts,
                                    const ReCoParams* reco) {
  std::vector<Caption> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    DecodeOptions o = opts;
    o.seed = opts.seed + i;
    out[i] = {i, model.generate(scenes[i], prompt, o, reco).tokens};
  });
  return out;
}

std::vector<cache::TraceRecord> synthesize_preferences(const ToyVlm& model,
                                                       std::span<const SceneSpec> scenes,
                                                       std::span<const Caption> captions,
                                                       std::span<const Token> prompt,
                                                       std::uint64_t seed) {
  require(scenes.size() == captions.size(), ErrorKind::InvalidArgument,
          "one caption per scene required");
  std::vector<cache::TraceRecord> out(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    const auto& rejected = captions[i].tokens;
    const auto chosen = correct_caption(model, scenes[i], rejected, seed + i);
    out[i] = make_preference_record(model, scenes[i], prompt, chosen, rejected,
                                    "scene-" + std::to_string(i));
  });
  return out;
}

metrics::CaptionEval caption_eval(const ToyVlm& model, const SceneSpec& scene,
                                  std::span<const Token> tokens) {
  metrics::CaptionEval e;
  // EOS ends the caption; it is not a sentence of its own.
  const auto end = std::find(tokens.begin(), tokens.end(), kEos);
  e.sentences = metrics::extract_mentions(std::span(tokens.begin(), end), kFirstObject,
                                          model.config().n_obj, kPeriod);
  e.ground_truth.insert(scene.objects.begin(), scene.objects.end());
  return e;
}

}  // namespace reco
