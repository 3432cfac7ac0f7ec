#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace reco {

using Vec = std::vector<double>;

// Dense row-major matrix. Sizes here are small (d <= a few hundred), so the
// loops are plain and their summation order is fixed, which keeps every
// result bit-reproducible.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = M x
Vec matvec(const Matrix& m, std::span<const double> x);
// y += M x
void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y);
// M += alpha * u v^T
void rank1_update(Matrix& m, double alpha, std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// Numerically stable softmax; summation in index order.
Vec softmax(std::span<const double> logits);
// log(sum(exp(z))) with max shift.
double log_sum_exp(std::span<const double> logits);

}  // namespace reco
