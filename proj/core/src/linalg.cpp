#include "reco/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "reco/error.hpp"

namespace reco {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vec matvec(const Matrix& m, std::span<const double> x) {
  Vec y(m.rows(), 0.0);
  matvec_acc(m, x, y);
  return y;
}

void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
  require(x.size() == m.cols() && y.size() == m.rows(), ErrorKind::DimensionMismatch,
          "matvec shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

void rank1_update(Matrix& m, double alpha, std::span<const double> u, std::span<const double> v) {
  require(u.size() == m.rows() && v.size() == m.cols(), ErrorKind::DimensionMismatch,
          "rank1 shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double s = alpha * u[r];
    if (s == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += s * v[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::DimensionMismatch, "dot length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), ErrorKind::DimensionMismatch, "axpy length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double log_sum_exp(std::span<const double> z) {
  require(!z.empty(), ErrorKind::InvalidArgument, "log_sum_exp of empty input");
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

Vec softmax(std::span<const double> z) {
  require(!z.empty(), ErrorKind::InvalidArgument, "softmax of empty input");
  const double m = *std::max_element(z.begin(), z.end());
  Vec p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace reco
