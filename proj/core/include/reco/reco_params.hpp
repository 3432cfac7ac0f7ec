#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "reco/linalg.hpp"

namespace reco {

// The two trainable matrices of the reminder-composition head:
//   B_t = W_T T_t + W_I (I_1 ⊕ ... ⊕ I_M)
// applied to the frozen model's final hidden state right before its
// prediction head. Immutable once built; training produces new values.
class ReCoParams {
 public:
  ReCoParams(Matrix w_text, Matrix w_image);

  // W_T = I, W_I = 0: the head passes T_t through unchanged.
  static ReCoParams identity(std::size_t d);

  std::size_t dim() const noexcept { return w_text_.rows(); }
  const Matrix& w_text() const noexcept { return w_text_; }
  const Matrix& w_image() const noexcept { return w_image_; }

  friend bool operator==(const ReCoParams&, const ReCoParams&) = default;

 private:
  Matrix w_text_;
  Matrix w_image_;
};

inline ReCoParams identity_init(std::size_t d) { return ReCoParams::identity(d); }

// W_T t + W_I image_bundle. The bundle is the precomputed ⊕ of the image
// token embeddings (see ga::bundle).
Vec compose(const ReCoParams& p, std::span<const double> t, std::span<const double> image_bundle);

// Checkpoint file:
//   u32 LE   header length L
//   L bytes  UTF-8 JSON {"format":"reco-params","version":1,"d":d}
//   d*d f64 LE  W_T, row-major
//   d*d f64 LE  W_I, row-major
void save_checkpoint(const ReCoParams& p, const std::filesystem::path& path);
ReCoParams load_checkpoint(const std::filesystem::path& path);

}  // namespace reco
