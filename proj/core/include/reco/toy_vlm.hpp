#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reco/linalg.hpp"
#include "reco/reco_params.hpp"
#include "reco/rng.hpp"

namespace reco {

using Token = std::uint32_t;

// Reserved vocabulary layout. Object tokens occupy [kFirstObject,
// kFirstObject + n_obj); everything above is filler.
inline constexpr Token kPad = 0;
inline constexpr Token kBos = 1;
inline constexpr Token kEos = 2;
inline constexpr Token kPeriod = 3;
inline constexpr Token kFirstObject = 4;
inline constexpr std::size_t kReservedTokens = 4;

struct VlmConfig {
  std::size_t d = 32;             // hidden dimension
  std::size_t vocab = 64;         // V
  std::size_t image_tokens = 8;   // M
  std::size_t n_obj = 16;
  double gamma0 = 1.0;            // initial image-channel gain
  double rho = 0.9;               // per-step gain decay
  std::uint64_t seed = 20240901;

  // Shape of the synthetic weights.
  double jitter = 0.1;            // per-scene noise on image embeddings
  double embed_scale = 4.0;       // norm of image-token output embeddings
  double object_gain = 6.0;       // head rows of object tokens = gain * base
  double filler_gain = 0.5;
  double period_gain = 2.0;

  // Throws Error(InvalidArgument) naming the first bad field.
  void validate() const;
  friend bool operator==(const VlmConfig&, const VlmConfig&) = default;
};

struct SceneSpec {
  std::vector<int> objects;  // sorted, distinct, in [0, n_obj)
  std::uint64_t scene_seed = 0;

  void validate(std::size_t n_obj) const;
  bool contains(int object) const;
};

enum class ImageChannel { On, Off };
enum class DecodeMode { Greedy, Sample };

struct DecodeOptions {
  std::size_t max_len = 96;
  DecodeMode mode = DecodeMode::Greedy;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool record_logits = false;
};

struct EmbeddingTrace {
  Matrix image_embeddings;  // M x d, the I_j
  Matrix hidden_states;     // N x d; row t is the state that predicted token t
  std::vector<Token> token_ids;
  std::string config_fingerprint;
};

struct Generation {
  std::vector<Token> tokens;
  EmbeddingTrace trace;
  Matrix logits;  // N x V, only when DecodeOptions::record_logits
};

struct DistPair {
  Vec with_image;
  Vec without_image;
};

// Frozen synthetic vision-language generator.
//
//   h_{t+1} = tanh(A h_t + E[w_t] + gamma0 rho^t C ī)
//   P(w | h) = softmax(H B),  B = h or W_T h + W_I ī under ReCo
//
// The explicit rho^t factor makes the image's influence on the hidden state
// fade at a known rate. Weights are drawn from SplitMix64(config.seed) in
// this order: object bases, A, E, C, H (row by row).
class ToyVlm {
 public:
  explicit ToyVlm(VlmConfig config);

  // Explicit weights (shapes: bases n_obj x d, A d x d, E V x d, C d x d,
  // H V x d). For hand-sized test instances.
  static ToyVlm from_weights(VlmConfig config, Matrix bases, Matrix a, Matrix e, Matrix c,
                             Matrix h);

  const VlmConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.d; }
  std::size_t vocab() const noexcept { return config_.vocab; }

  const Matrix& recurrence() const noexcept { return a_; }
  const Matrix& token_embedding() const noexcept { return e_; }
  const Matrix& image_map() const noexcept { return c_; }
  const Matrix& head() const noexcept { return h_; }
  const Matrix& object_bases() const noexcept { return bases_; }

  Token object_token(int object) const;
  bool is_object_token(Token t) const noexcept;

  // FNV-1a over every weight byte, in construction order.
  std::uint64_t weights_checksum() const noexcept { return weights_checksum_; }
  // FNV-1a over the canonical config JSON followed by the weight checksum.
  const std::string& config_fingerprint() const noexcept { return fingerprint_; }

  std::vector<Vec> encode_image(const SceneSpec& scene) const;
  Vec image_bundle(const SceneSpec& scene) const;

  Vec step(std::span<const double> h, Token w, std::span<const double> image_bundle,
           std::size_t t, ImageChannel channel = ImageChannel::On) const;

  Vec logits(std::span<const double> h, const ReCoParams* reco,
             std::span<const double> image_bundle) const;
  Vec next_token_dist(std::span<const double> h, const ReCoParams* reco,
                      std::span<const double> image_bundle) const;

  Generation generate(const SceneSpec& scene, std::span<const Token> prompt,
                      const DecodeOptions& opts, const ReCoParams* reco = nullptr) const;

  // Two synchronized rollouts of exactly t_max steps. Tokens are chosen from
  // the with-image distribution and fed to both; the twin runs with the image
  // channel off and, under ReCo, a zero bundle.
  std::vector<DistPair> dist_pair_with_without_image(const SceneSpec& scene,
                                                     std::span<const Token> prompt,
                                                     std::size_t t_max,
                                                     const ReCoParams* reco = nullptr,
                                                     const DecodeOptions& opts = {}) const;

  struct TeacherForced {
    Matrix prompt_states;  // row i predicts prompt[i]; row 0 is the zero state
    Matrix answer_states;  // row i predicts answer[i]
  };
  TeacherForced teacher_force(std::span<const double> image_bundle, std::span<const Token> prompt,
                              std::span<const Token> answer) const;

 private:
  ToyVlm() = default;
  void finalize();
  void check_token(Token w) const;
  Token choose(std::span<const double> logits, const DecodeOptions& opts,
               SplitMix64& rng) const;

  VlmConfig config_;
  Matrix bases_;
  Matrix a_;
  Matrix e_;
  Matrix c_;
  Matrix h_;
  std::uint64_t weights_checksum_ = 0;
  std::string fingerprint_;
};

inline ToyVlm build_model(const VlmConfig& config) { return ToyVlm(config); }

// Random scenes with 1..max_objects distinct objects each.
std::vector<SceneSpec> random_scenes(std::size_t count, std::size_t n_obj, std::uint64_t seed,
                                     std::size_t max_objects = 4);

// Replaces every object token that is absent from the scene by a present
// object (drawn from rng). The result is the "corrected" caption.
std::vector<Token> correct_caption(const ToyVlm& model, const SceneSpec& scene,
                                   std::span<const Token> caption, std::uint64_t seed);

// JSON helpers. Field names match VlmConfig members.
std::string config_to_json(const VlmConfig& c);
VlmConfig config_from_json(const std::string& text);
VlmConfig load_config(const std::filesystem::path& path);

// Scene files: JSON lines {"objects":[...],"scene_seed":n}.
std::vector<SceneSpec> parse_scenes(const std::string& text);
std::vector<SceneSpec> load_scenes(const std::filesystem::path& path);
std::string scenes_to_jsonl(std::span<const SceneSpec> scenes);

}  // namespace reco
