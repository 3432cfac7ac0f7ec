#include "reco/preference.hpp"

#include "reco/ga.hpp"

namespace reco {

cache::TraceRecord make_preference_record(const ToyVlm& model, const SceneSpec& scene,
                                          std::span<const Token> prompt,
                                          std::span<const Token> chosen,
                                          std::span<const Token> rejected, std::string example_id) {
  const auto images = model.encode_image(scene);
  const Vec bundle = ga::bundle(images);
  const auto c = model.teacher_force(bundle, prompt, chosen);
  const auto r = model.teacher_force(bundle, prompt, rejected);

  Matrix image_matrix(images.size(), model.dim());
  for (std::size_t j = 0; j < images.size(); ++j)
    std::copy(images[j].begin(), images[j].end(), image_matrix.row(j).begin());

  cache::TraceRecord rec;
  rec.example_id = std::move(example_id);
  rec.d = static_cast<std::uint32_t>(model.dim());
  rec.image_tokens = static_cast<std::uint32_t>(images.size());
  rec.image_embeddings = cache::to_f32(image_matrix);
  rec.prompt = {{prompt.begin(), prompt.end()}, cache::to_f32(c.prompt_states)};
  rec.chosen = {{chosen.begin(), chosen.end()}, cache::to_f32(c.answer_states)};
  rec.rejected = {{rejected.begin(), rejected.end()}, cache::to_f32(r.answer_states)};
  rec.source = {kToyModelName, kToyTapPoint, model.config_fingerprint()};
  return rec;
}

}  // namespace reco
