#include "reco/ga_check.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "reco/error.hpp"
#include "reco/ga.hpp"
#include "reco/rng.hpp"

namespace reco::ga {

namespace {

Vec random_vector(SplitMix64& rng, int n) {
  Vec v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.normal();
  return v;
}

// Modified Gram-Schmidt, two passes. Returns false if the draw was degenerate.
bool orthogonalize(std::vector<Vec>& vs) {
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) axpy(-dot(vs[i], vs[j]), vs[j], vs[i]);
    const double nrm = norm2(vs[i]);
    if (nrm < 1e-8) return false;
    for (double& x : vs[i]) x /= nrm;
  }
  return true;
}

Multivector random_multivector(SplitMix64& rng, int n) {
  Multivector m(n);
  for (Blade b = 0; b < m.blade_count(); ++b) m[b] = 2.0 * rng.uniform() - 1.0;
  return m;
}

void record(PropertyResult& p, bool ok, double deviation) {
  ++p.checked;
  if (!ok) ++p.failures;
  p.worst = std::max(p.worst, deviation);
}

}  // namespace

bool GaCheckReport::passed() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.passed(); });
}

std::string GaCheckReport::summary() const {
  std::ostringstream os;
  for (const auto& p : properties) {
    os << (p.passed() ? "PASS " : "FAIL ") << p.name << " checked=" << p.checked
       << " failures=" << p.failures << " worst=" << p.worst << '\n';
  }
  return os.str();
}

GaCheckReport run_ga_checks(const GaCheckOptions& opts) {
  require(opts.min_dim >= 2 && opts.max_dim <= kMaxDim && opts.min_dim <= opts.max_dim,
          ErrorKind::InvalidArgument, "ga check dims must satisfy 2 <= min <= max <= 8");

  PropertyResult antisym{"wedge-antisymmetry"};
  PropertyResult nilpot{"wedge-nilpotence"};
  PropertyResult equiv{"orthogonal-product-equals-wedge"};
  PropertyResult skew{"skewed-product-differs-from-wedge"};
  PropertyResult assoc{"product-associativity"};
  PropertyResult unit{"e1-squared-is-one"};
  PropertyResult norm{"scalar-part-is-squared-norm"};

  SplitMix64 rng(opts.seed);
  const auto dims = static_cast<std::uint64_t>(opts.max_dim - opts.min_dim + 1);
  // Cosine of an 80 degree angle: pairs at least 10 degrees off orthogonal.
  const double min_skew_cos = std::cos(80.0 * std::numbers::pi / 180.0);

  for (std::uint64_t trial = 0; trial < opts.trials; ++trial) {
    const int n = opts.min_dim + static_cast<int>(rng.below(dims));

    const Vec a = random_vector(rng, n);
    const Vec b = random_vector(rng, n);
    {
      const std::vector<Vec> ab{a, b}, ba{b, a};
      const Multivector lhs = wedge(ab);
      const Multivector rhs = -wedge(ba);
      record(antisym, lhs == rhs, max_deviation(lhs, rhs));
    }
    {
      const std::vector<Vec> aa{a, a};
      const Multivector w = wedge(aa);
      record(nilpot, w.is_zero(), max_deviation(w, Multivector(n)));
    }
    {
      const int k = 1 + static_cast<int>(rng.below(
                            static_cast<std::uint64_t>(std::min(n, kMaxPermutationWedge))));
      std::vector<Vec> vs;
      for (int i = 0; i < k; ++i) vs.push_back(random_vector(rng, n));
      if (orthogonalize(vs)) {
        const auto r = orthogonal_equivalence_check(vs, opts.equivalence_tol);
        record(equiv, r.holds, r.max_deviation);
      }
      if (k >= 2) {
        // Tilt the second vector towards the first until their angle is at
        // most 80 degrees, then expect the equivalence to break.
        std::vector<Vec> tilted = vs;
        const double mix = 0.25 + rng.uniform();
        axpy(mix, tilted[0], tilted[1]);
        const double cosang =
            std::abs(dot(tilted[0], tilted[1])) / (norm2(tilted[0]) * norm2(tilted[1]));
        if (cosang >= min_skew_cos) {
          const auto r = orthogonal_equivalence_check(tilted, opts.equivalence_tol);
          ++skew.checked;
          if (r.holds) ++skew.failures;
          skew.worst = skew.checked == 1 ? r.max_deviation : std::min(skew.worst, r.max_deviation);
        }
      }
    }
    {
      const int m = std::min(n, 5);
      const Multivector x = random_multivector(rng, m);
      const Multivector y = random_multivector(rng, m);
      const Multivector z = random_multivector(rng, m);
      const double dev = max_deviation(geometric_product(geometric_product(x, y), z),
                                       geometric_product(x, geometric_product(y, z)));
      record(assoc, dev <= opts.associativity_tol, dev);
    }
    {
      const Multivector e1 = Multivector::basis(n, blade({1}));
      const Multivector sq = geometric_product(e1, e1);
      record(unit, sq == Multivector::scalar(n, 1.0), max_deviation(sq, Multivector::scalar(n, 1.0)));
    }
    {
      const Multivector av = Multivector::from_vector(a);
      const double s = geometric_product(av, av)[0];
      const double expect = dot(a, a);
      const double dev = std::abs(s - expect);
      record(norm, dev <= opts.norm_tol, dev);
    }
  }

  GaCheckReport report;
  report.properties = {antisym, nilpot, equiv, skew, assoc, unit, norm};
  return report;
}

}  // namespace reco::ga
