#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace reco::ga {

struct GaCheckOptions {
  std::uint64_t trials = 1000;
  int min_dim = 2;
  int max_dim = 6;
  std::uint64_t seed = 7;
  double equivalence_tol = 1e-10;
  double associativity_tol = 1e-12;
  double norm_tol = 1e-12;
};

struct PropertyResult {
  std::string name;
  std::uint64_t checked = 0;
  std::uint64_t failures = 0;
  double worst = 0.0;  // largest deviation seen (or smallest, for separation checks)
  bool passed() const { return failures == 0; }
};

struct GaCheckReport {
  std::vector<PropertyResult> properties;
  bool passed() const;
  std::string summary() const;
};

// Randomized property suite over the algebra: antisymmetry and nilpotence of
// the wedge, product/wedge agreement on orthogonal sets and disagreement on
// skewed sets, associativity, e1 e1 = 1, and a a = |a|^2.
GaCheckReport run_ga_checks(const GaCheckOptions& opts);

}  // namespace reco::ga
