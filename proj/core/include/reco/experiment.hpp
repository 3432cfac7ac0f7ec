#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "reco/diagnostics.hpp"
#include "reco/dpo.hpp"
#include "reco/metrics.hpp"
#include "reco/toy_vlm.hpp"

namespace reco::experiment {

// Half-open step window [begin, end).
struct Window {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Scaled-down end-to-end run: caption training scenes with the frozen model,
// build preference pairs, train ReCo with DPO, then compare the base and
// ReCo models on held-out scenes.
struct Protocol {
  VlmConfig model;
  std::size_t train_scenes = 500;
  std::uint64_t train_scene_seed = 1;
  std::size_t test_scenes = 100;
  std::uint64_t test_scene_seed = 2;
  // Rejected answers are sampled so they carry a realistic hallucination mix.
  DecodeOptions train_decode{96, DecodeMode::Sample, 1.0, 11, false};
  std::uint64_t preference_seed = 5;
  dpo::DpoConfig dpo;
  // Mildly tempered sampling. Greedy decoding of the toy model collapses into
  // repeated loops that say little about either arm.
  DecodeOptions eval_decode{96, DecodeMode::Sample, 0.7, 99, false};
  std::size_t t_max = 96;
  Window early{0, 8};
  Window late{64, 96};

  void validate() const;
};

struct Arm {
  metrics::ChairResult chair_i;
  metrics::ChairResult chair_s;
  diag::InfluenceCurve curve;
  double early_hellinger = 0.0;  // curve mean over Protocol::early
  double late_hellinger = 0.0;   // curve mean over Protocol::late
  double mean_caption_tokens = 0.0;
};

struct Outcome {
  dpo::TrainResult training;
  std::size_t preference_pairs = 0;
  Arm base;
  Arm reco;
  double seconds = 0.0;
};

Outcome run(const Protocol& protocol);

std::string protocol_to_json(const Protocol& p);
std::string outcome_to_json(const Outcome& o, const Protocol& p);

}  // namespace reco::experiment
