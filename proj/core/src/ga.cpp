#include "reco/ga.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include "reco/error.hpp"

namespace reco::ga {

namespace {

void check_dim(int n) {
  require(n >= 1 && n <= kMaxDim, ErrorKind::InvalidArgument,
          "multivector dimension must be in [1, 8]");
}

std::size_t shared_dim(std::span<const Vec> vs) {
  require(!vs.empty(), ErrorKind::InvalidArgument, "empty vector list");
  const std::size_t n = vs.front().size();
  for (const Vec& v : vs) {
    require(v.size() == n, ErrorKind::DimensionMismatch, "vectors differ in dimension");
  }
  return n;
}

int permutation_parity(std::span<const int> perm) {
  int inversions = 0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) ++inversions;
  return (inversions & 1) ? -1 : 1;
}

}  // namespace

Blade blade(std::initializer_list<int> indices) {
  Blade b = 0;
  int last = 0;
  for (int i : indices) {
    require(i > last && i <= kMaxDim, ErrorKind::InvalidArgument,
            "blade indices must be strictly increasing in [1, 8]");
    b |= Blade{1} << (i - 1);
    last = i;
  }
  return b;
}

int grade(Blade b) noexcept { return std::popcount(b); }

int blade_product_sign(Blade a, Blade b) noexcept {
#ifdef RECO_GA_INJECT_SIGN_BUG
  (void)a;
  (void)b;
  return 1;
#else
  // Each generator of b must move left past every generator of a with a
  // larger index.
  int swaps = 0;
  for (Blade rest = a >> 1; rest != 0; rest >>= 1) swaps += std::popcount(rest & b);
  return (swaps & 1) ? -1 : 1;
#endif
}

Multivector::Multivector(int n) : n_(n) {
  check_dim(n);
  coeffs_.assign(std::size_t{1} << n, 0.0);
}

Multivector Multivector::scalar(int n, double s) {
  Multivector m(n);
  m.coeffs_[0] = s;
  return m;
}

Multivector Multivector::from_vector(std::span<const double> v) {
  Multivector m(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]), ErrorKind::InvalidArgument, "non-finite vector component");
    m.coeffs_[std::size_t{1} << i] = v[i];
  }
  return m;
}

Multivector Multivector::basis(int n, Blade b, double coeff) {
  Multivector m(n);
  require(b < m.coeffs_.size(), ErrorKind::OutOfRange, "blade outside ambient dimension");
  m.coeffs_[b] = coeff;
  return m;
}

Multivector Multivector::grade_part(int k) const {
  Multivector out(n_);
  for (Blade b = 0; b < coeffs_.size(); ++b)
    if (grade(b) == k) out.coeffs_[b] = coeffs_[b];
  return out;
}

double Multivector::off_grade_max(int k) const {
  double m = 0.0;
  for (Blade b = 0; b < coeffs_.size(); ++b)
    if (grade(b) != k) m = std::max(m, std::abs(coeffs_[b]));
  return m;
}

bool Multivector::is_zero() const noexcept {
  return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
}

Multivector& Multivector::operator+=(const Multivector& o) {
  require(o.n_ == n_, ErrorKind::DimensionMismatch, "multivector dimension mismatch");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

Multivector& Multivector::operator-=(const Multivector& o) {
  require(o.n_ == n_, ErrorKind::DimensionMismatch, "multivector dimension mismatch");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

Multivector& Multivector::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

std::string Multivector::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (Blade b = 0; b < coeffs_.size(); ++b) {
    const double c = coeffs_[b];
    if (c == 0.0) continue;
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    os << std::abs(c);
    if (b != 0) {
      os << "*e";
      for (int i = 0; i < n_; ++i)
        if (b & (Blade{1} << i)) os << (i + 1);
    }
    first = false;
  }
  return first ? "0" : os.str();
}

Vec bundle(std::span<const Vec> vs, BundleMode mode) {
  const std::size_t n = shared_dim(vs);
  Vec out(n, 0.0);
  for (const Vec& v : vs)
    for (std::size_t i = 0; i < n; ++i) out[i] += v[i];
  if (mode == BundleMode::Mean) {
    const double inv = 1.0 / static_cast<double>(vs.size());
    for (double& x : out) x *= inv;
  }
  return out;
}

Multivector geometric_product(const Multivector& a, const Multivector& b) {
  require(a.dim() == b.dim(), ErrorKind::DimensionMismatch, "multivector dimension mismatch");
  Multivector out(a.dim());
  const auto ca = a.coeffs();
  const auto cb = b.coeffs();
  for (Blade x = 0; x < ca.size(); ++x) {
    if (ca[x] == 0.0) continue;
    for (Blade y = 0; y < cb.size(); ++y) {
      if (cb[y] == 0.0) continue;
      out[x ^ y] += blade_product_sign(x, y) * (ca[x] * cb[y]);
    }
  }
  return out;
}

Multivector geometric_product(std::span<const Vec> vs) {
  shared_dim(vs);
  Multivector acc = Multivector::from_vector(vs.front());
  for (std::size_t i = 1; i < vs.size(); ++i)
    acc = geometric_product(acc, Multivector::from_vector(vs[i]));
  return acc;
}

Multivector wedge(std::span<const Vec> vs) {
  const std::size_t n = shared_dim(vs);
  const std::size_t k = vs.size();
  require(k <= kMaxPermutationWedge, ErrorKind::InvalidArgument,
          "permutation-sum wedge limited to k <= 6; use outer_product");
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Vec> ordered(k);
  Multivector sum(static_cast<int>(n));
  double count = 0.0;
  do {
    for (std::size_t i = 0; i < k; ++i) ordered[i] = vs[perm[i]];
    Multivector term = geometric_product(ordered);
    if (permutation_parity(perm) < 0) sum -= term;
    else sum += term;
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  sum *= 1.0 / count;
  return sum;
}

Multivector outer_product(std::span<const Vec> vs) {
  shared_dim(vs);
  Multivector acc = Multivector::from_vector(vs.front());
  for (std::size_t i = 1; i < vs.size(); ++i) {
    const Multivector v = Multivector::from_vector(vs[i]);
    Multivector next(acc.dim());
    const auto ca = acc.coeffs();
    const auto cv = v.coeffs();
    for (Blade x = 0; x < ca.size(); ++x) {
      if (ca[x] == 0.0) continue;
      for (Blade y = 0; y < cv.size(); ++y) {
        if (cv[y] == 0.0 || (x & y) != 0) continue;
        next[x | y] += blade_product_sign(x, y) * (ca[x] * cv[y]);
      }
    }
    acc = std::move(next);
  }
  return acc;
}

double max_deviation(const Multivector& a, const Multivector& b) {
  require(a.dim() == b.dim(), ErrorKind::DimensionMismatch, "multivector dimension mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.blade_count(); ++i)
    m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
  return m;
}

EquivalenceReport orthogonal_equivalence_check(std::span<const Vec> vs, double tol) {
  const Multivector prod = geometric_product(vs);
  const Multivector w =
      vs.size() <= static_cast<std::size_t>(kMaxPermutationWedge) ? wedge(vs) : outer_product(vs);
  EquivalenceReport r;
  r.max_deviation = max_deviation(prod, w);
  r.holds = r.max_deviation <= tol;
  return r;
}

}  // namespace reco::ga
