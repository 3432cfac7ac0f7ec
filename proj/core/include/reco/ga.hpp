#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "reco/linalg.hpp"

// Exact low-dimensional geometric algebra over R^n with Euclidean signature
// (e_i e_i = +1). A basis blade e_{i1} e_{i2} ... e_{ik} with i1 < ... < ik is
// keyed by the bitmask with bits i1-1, ..., ik-1 set; the ascending index
// order is implied by the mask, so every key is canonical.
namespace reco::ga {

inline constexpr int kMaxDim = 8;
inline constexpr int kMaxPermutationWedge = 6;

using Blade = std::uint32_t;

// Blade from 1-based indices, e.g. blade({1, 2}) is e1e2. Indices must be
// strictly increasing and within [1, kMaxDim].
Blade blade(std::initializer_list<int> indices);
int grade(Blade b) noexcept;

// Sign of e_a e_b once reordered to canonical form. Squared generators
// contribute +1, so only the transposition count matters.
int blade_product_sign(Blade a, Blade b) noexcept;

class Multivector {
 public:
  explicit Multivector(int n);

  static Multivector scalar(int n, double s);
  static Multivector from_vector(std::span<const double> v);
  static Multivector basis(int n, Blade b, double coeff = 1.0);

  int dim() const noexcept { return n_; }
  std::size_t blade_count() const noexcept { return coeffs_.size(); }

  double operator[](Blade b) const { return coeffs_.at(b); }
  double& operator[](Blade b) { return coeffs_.at(b); }
  std::span<const double> coeffs() const noexcept { return coeffs_; }

  // Part of grade k; zero elsewhere.
  Multivector grade_part(int k) const;
  // Largest |coefficient| over blades outside grade k.
  double off_grade_max(int k) const;
  bool is_zero() const noexcept;

  Multivector& operator+=(const Multivector& o);
  Multivector& operator-=(const Multivector& o);
  Multivector& operator*=(double s);

  friend Multivector operator+(Multivector a, const Multivector& b) { return a += b; }
  friend Multivector operator-(Multivector a, const Multivector& b) { return a -= b; }
  friend Multivector operator*(Multivector a, double s) { return a *= s; }
  friend Multivector operator*(double s, Multivector a) { return a *= s; }
  friend Multivector operator-(Multivector a) { return a *= -1.0; }

  friend bool operator==(const Multivector&, const Multivector&) = default;

  // e.g. "1 - 1*e12" ; zero prints as "0".
  std::string to_string() const;

 private:
  int n_;
  std::vector<double> coeffs_;
};

// Componentwise sum of 1-vectors: the bundle (⊕) over image tokens.
// BundleMode::Mean divides by the count afterwards.
enum class BundleMode { Sum, Mean };
Vec bundle(std::span<const Vec> vs, BundleMode mode = BundleMode::Sum);

Multivector geometric_product(const Multivector& a, const Multivector& b);
// Left-to-right product of 1-vectors v1 v2 ... vk.
Multivector geometric_product(std::span<const Vec> vs);

// v1 ∧ ... ∧ vk as the antisymmetrized average of all k! ordered geometric
// products. Limited to k <= kMaxPermutationWedge.
Multivector wedge(std::span<const Vec> vs);
// Same quantity via the blade-table outer product (e_A ∧ e_B vanishes when A
// and B share an index). No factorial cost; valid for any k <= n.
Multivector outer_product(std::span<const Vec> vs);

// max-abs distance between two multivectors of the same dimension.
double max_deviation(const Multivector& a, const Multivector& b);

struct EquivalenceReport {
  double max_deviation = 0.0;
  bool holds = false;
};

// Compares the geometric product of vs against their wedge. The two agree
// exactly iff the inputs are pairwise orthogonal.
EquivalenceReport orthogonal_equivalence_check(std::span<const Vec> vs, double tol);

}  // namespace reco::ga
