#include <benchmark/benchmark.h>

#include "reco/ga.hpp"
#include "reco/rng.hpp"

namespace {

using namespace reco;

ga::Multivector random_multivector(int n, SplitMix64& rng) {
  ga::Multivector m(n);
  for (ga::Blade b = 0; b < m.blade_count(); ++b) m[b] = rng.normal();
  return m;
}

void BM_GeometricProduct(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SplitMix64 rng(1);
  const auto a = random_multivector(n, rng);
  const auto b = random_multivector(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ga::geometric_product(a, b));
}
BENCHMARK(BM_GeometricProduct)->DenseRange(2, 8, 2);

void BM_Wedge(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  SplitMix64 rng(2);
  std::vector<Vec> vs(static_cast<std::size_t>(k), Vec(6));
  for (auto& v : vs)
    for (double& x : v) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(ga::wedge(vs));
}
BENCHMARK(BM_Wedge)->DenseRange(2, 6, 1);

}  // namespace
