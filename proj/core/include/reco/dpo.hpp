#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reco/cache.hpp"
#include "reco/linalg.hpp"
#include "reco/reco_params.hpp"
#include "reco/toy_vlm.hpp"

namespace reco::dpo {

enum class Optimizer { GradientDescent, Adam };

std::string_view to_string(Optimizer o);
Optimizer optimizer_from_string(std::string_view s);

struct DpoConfig {
  double beta = 0.8;
  double lambda = 0.2;
  double lr = 5e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  Optimizer optimizer = Optimizer::GradientDescent;
  std::uint64_t seed = 0;
  // Adam moments; unused by plain gradient descent.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

std::string config_to_json(const DpoConfig& c);
DpoConfig config_from_json(const std::string& text);
DpoConfig load_config(const std::filesystem::path& path);

// Teacher-forced answer: states[i] is the hidden state that predicts tokens[i].
struct AnswerSegment {
  Matrix states;
  std::vector<Token> tokens;
};

// (I, P, C, R) in binary64. The prompt contributes no loss term, so only the
// image bundle and the two answers are kept.
struct PreferenceQuad {
  Vec image_bundle;
  AnswerSegment chosen;
  AnswerSegment rejected;
};

PreferenceQuad quad_from_record(const cache::TraceRecord& r);

struct Gradient {
  Matrix d_text;   // dL/dW_T
  Matrix d_image;  // dL/dW_I

  Gradient() = default;
  explicit Gradient(std::size_t d) : d_text(d, d), d_image(d, d) {}
  Gradient& operator+=(const Gradient& o);
  double max_abs() const;
};

// Σ_i log softmax(H compose(reco, states[i], bundle))[tokens[i]]; a null reco
// scores the bare model.
double seq_logprob(const Matrix& head, const ReCoParams* reco, const AnswerSegment& seg,
                   std::span<const double> image_bundle);

// HA-DPO objective over a batch, with the reference log-probabilities fixed
// at construction:
//   L = mean_b [ -log σ(β((lc - lc_ref) - (lr - lr_ref))) + λ (-lc / |C|) ]
class DpoObjective {
 public:
  DpoObjective(const Matrix& head, ReCoParams reference, std::span<const PreferenceQuad> quads,
               DpoConfig cfg);

  double loss(const ReCoParams& policy) const;
  double loss(const ReCoParams& policy, std::span<const std::size_t> batch) const;
  // When quad_losses is non-empty, quad_losses[batch[i]] receives the loss of that quad.
  Gradient gradient(const ReCoParams& policy, std::span<const std::size_t> batch,
                    std::span<double> quad_losses = {}) const;
  Gradient gradient(const ReCoParams& policy) const;

  std::size_t size() const noexcept { return quads_.size(); }

 private:
  struct PerQuad {
    double loss = 0.0;
    Gradient grad;
  };
  PerQuad evaluate(const ReCoParams& policy, std::size_t q, bool want_grad) const;
  std::vector<std::size_t> all_indices() const;

  const Matrix& head_;
  ReCoParams reference_;
  std::span<const PreferenceQuad> quads_;
  DpoConfig cfg_;
  std::vector<double> ref_chosen_;
  std::vector<double> ref_rejected_;
};

double dpo_loss(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                std::span<const PreferenceQuad> batch, const DpoConfig& cfg);
Gradient grad_analytic(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                       std::span<const PreferenceQuad> batch, const DpoConfig& cfg);
// Central differences, entry by entry.
Gradient grad_fd(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                 std::span<const PreferenceQuad> batch, const DpoConfig& cfg, double step);

struct TrainResult {
  ReCoParams params;
  std::vector<double> epoch_losses;  // mean per-quad loss seen during each epoch
  std::size_t updates = 0;
};

// Reference = init, frozen. Batches come from a seeded Fisher-Yates shuffle
// each epoch; the last partial batch is kept.
TrainResult train(const Matrix& head, std::span<const PreferenceQuad> quads, const DpoConfig& cfg,
                  const ReCoParams& init);
TrainResult train(const Matrix& head, const std::filesystem::path& cache_path, const DpoConfig& cfg,
                  const ReCoParams& init);

}  // namespace reco::dpo
