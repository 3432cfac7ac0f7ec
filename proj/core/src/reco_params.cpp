#include "reco/reco_params.hpp"

#include <cmath>

#include "reco/error.hpp"

namespace reco {

namespace {

bool all_finite(const Matrix& m) {
  for (double x : m.data())
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

ReCoParams::ReCoParams(Matrix w_text, Matrix w_image)
    : w_text_(std::move(w_text)), w_image_(std::move(w_image)) {
  require(w_text_.rows() >= 1 && w_text_.rows() == w_text_.cols(), ErrorKind::DimensionMismatch,
          "W_T must be square with d >= 1");
  require(w_image_.rows() == w_text_.rows() && w_image_.cols() == w_text_.cols(),
          ErrorKind::DimensionMismatch, "W_I must match W_T in shape");
  require(all_finite(w_text_) && all_finite(w_image_), ErrorKind::InvalidArgument,
          "ReCo parameters must be finite");
}

ReCoParams ReCoParams::identity(std::size_t d) {
  require(d >= 1, ErrorKind::InvalidArgument, "ReCo dimension must be >= 1");
  return ReCoParams(Matrix::identity(d), Matrix(d, d));
}

Vec compose(const ReCoParams& p, std::span<const double> t, std::span<const double> image_bundle) {
  const std::size_t d = p.dim();
  require(t.size() == d && image_bundle.size() == d, ErrorKind::DimensionMismatch,
          "compose inputs must have dimension d");
  Vec out = matvec(p.w_text(), t);
  matvec_acc(p.w_image(), image_bundle, out);
  return out;
}

}  // namespace reco
