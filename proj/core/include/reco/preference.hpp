#pragma once

#include <span>
#include <string>

#include "reco/cache.hpp"
#include "reco/toy_vlm.hpp"

namespace reco {

inline constexpr const char* kToyModelName = "toy-vlm";
inline constexpr const char* kToyTapPoint = "recurrent state h_t, pre-head";

// Teacher-forces prompt, chosen and rejected through the frozen model (image
// channel on) and packs the resulting states as a cache record.
cache::TraceRecord make_preference_record(const ToyVlm& model, const SceneSpec& scene,
                                          std::span<const Token> prompt,
                                          std::span<const Token> chosen,
                                          std::span<const Token> rejected, std::string example_id);

}  // namespace reco
