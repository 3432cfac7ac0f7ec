#include "reco/experiment.hpp"

#include <chrono>

#include <json.hpp>

#include "reco/error.hpp"
#include "reco/simulate.hpp"

namespace reco::experiment {

namespace {

using nlohmann::json;

json decode_json(const DecodeOptions& o) {
  return {{"max_len", o.max_len},
          {"mode", o.mode == DecodeMode::Greedy ? "greedy" : "sample"},
          {"temperature", o.temperature},
          {"seed", o.seed}};
}

json chair_json(const metrics::ChairResult& r) {
  return {{"value", r.value}, {"hallucinated", r.hallucinated}, {"total", r.total}};
}

Arm evaluate(const ToyVlm& model, std::span<const SceneSpec> scenes, const Protocol& p,
             const ReCoParams* reco) {
  Arm arm;
  const auto captions = caption_scenes(model, scenes, kDefaultPrompt, p.eval_decode, reco);
  std::vector<metrics::CaptionEval> evals;
  evals.reserve(captions.size());
  std::size_t tokens = 0;
  for (const auto& c : captions) {
    evals.push_back(caption_eval(model, scenes[c.scene_index], c.tokens));
    tokens += c.tokens.size();
  }
  arm.chair_i = metrics::chair_i(evals);
  arm.chair_s = metrics::chair_s(evals);
  arm.mean_caption_tokens = static_cast<double>(tokens) / static_cast<double>(captions.size());
  arm.curve = diag::influence_curve(model, scenes, kDefaultPrompt, p.t_max, reco);
  arm.early_hellinger = arm.curve.window_mean(p.early.begin, p.early.end);
  arm.late_hellinger = arm.curve.window_mean(p.late.begin, p.late.end);
  return arm;
}

}  // namespace

void Protocol::validate() const {
  model.validate();
  dpo.validate();
  require(train_scenes > 0 && test_scenes > 0, ErrorKind::InvalidArgument,
          "scene counts must be positive");
  require(t_max > 0, ErrorKind::InvalidArgument, "t_max must be positive");
  for (const Window& w : {early, late})
    require(w.begin < w.end && w.end <= t_max, ErrorKind::OutOfRange,
            "diagnostic window must lie inside [0, t_max)");
}

Outcome run(const Protocol& p) {
  p.validate();
  const auto start = std::chrono::steady_clock::now();
  const ToyVlm model(p.model);
  const auto train_scenes = random_scenes(p.train_scenes, p.model.n_obj, p.train_scene_seed);
  const auto test_scenes = random_scenes(p.test_scenes, p.model.n_obj, p.test_scene_seed);

  const auto captions = caption_scenes(model, train_scenes, kDefaultPrompt, p.train_decode);
  const auto records =
      synthesize_preferences(model, train_scenes, captions, kDefaultPrompt, p.preference_seed);
  std::vector<dpo::PreferenceQuad> quads;
  quads.reserve(records.size());
  for (const auto& r : records) quads.push_back(dpo::quad_from_record(r));

  Outcome out{dpo::train(model.head(), quads, p.dpo, identity_init(p.model.d)), quads.size(), {}, {}, 0.0};
  out.base = evaluate(model, test_scenes, p, nullptr);
  out.reco = evaluate(model, test_scenes, p, &out.training.params);
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string protocol_to_json(const Protocol& p) {
  const json j = {{"model", json::parse(config_to_json(p.model))},
                  {"train_scenes", p.train_scenes},
                  {"train_scene_seed", p.train_scene_seed},
                  {"test_scenes", p.test_scenes},
                  {"test_scene_seed", p.test_scene_seed},
                  {"train_decode", decode_json(p.train_decode)},
                  {"preference_seed", p.preference_seed},
                  {"dpo", json::parse(dpo::config_to_json(p.dpo))},
                  {"eval_decode", decode_json(p.eval_decode)},
                  {"t_max", p.t_max},
                  {"early", {p.early.begin, p.early.end}},
                  {"late", {p.late.begin, p.late.end}}};
  return j.dump();
}

std::string outcome_to_json(const Outcome& o, const Protocol& p) {
  auto arm = [](const Arm& a) {
    return json{{"chair_i", chair_json(a.chair_i)},
                {"chair_s", chair_json(a.chair_s)},
                {"early_hellinger", a.early_hellinger},
                {"late_hellinger", a.late_hellinger},
                {"mean_caption_tokens", a.mean_caption_tokens}};
  };
  const json j = {{"protocol", json::parse(protocol_to_json(p))},
                  {"preference_pairs", o.preference_pairs},
                  {"epoch_losses", o.training.epoch_losses},
                  {"base", arm(o.base)},
                  {"reco", arm(o.reco)},
                  {"seconds", o.seconds}};
  return j.dump(2);
}

}  // namespace reco::experiment
