#include <benchmark/benchmark.h>

#include "reco/dpo.hpp"
#include "reco/rng.hpp"

namespace {

using namespace reco;

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng) {
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.normal();
  return m;
}

std::vector<dpo::PreferenceQuad> random_quads(std::size_t count, std::size_t d, std::size_t v,
                                              std::size_t len, SplitMix64& rng) {
  std::vector<dpo::PreferenceQuad> quads(count);
  for (auto& q : quads) {
    q.image_bundle.resize(d);
    for (double& x : q.image_bundle) x = rng.normal();
    for (auto* s : {&q.chosen, &q.rejected}) {
      s->states = random_matrix(len, d, rng);
      for (std::size_t i = 0; i < len; ++i) s->tokens.push_back(static_cast<Token>(rng.below(v)));
    }
  }
  return quads;
}

// One batch of 128 quads with 32-token answers at the default toy sizes.
void BM_DpoGradientBatch(benchmark::State& state) {
  const std::size_t d = 32, v = 64;
  SplitMix64 rng(6);
  const Matrix head = random_matrix(v, d, rng);
  const auto quads = random_quads(128, d, v, 32, rng);
  const auto ref = identity_init(d);
  const dpo::DpoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(dpo::grad_analytic(head, ref, ref, quads, cfg));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_DpoGradientBatch)->Unit(benchmark::kMillisecond);

void BM_DpoGradientFiniteDifference(benchmark::State& state) {
  const std::size_t d = 8, v = 16;
  SplitMix64 rng(7);
  const Matrix head = random_matrix(v, d, rng);
  const auto quads = random_quads(4, d, v, 4, rng);
  const auto ref = identity_init(d);
  const dpo::DpoConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(dpo::grad_fd(head, ref, ref, quads, cfg, 1e-5));
}
BENCHMARK(BM_DpoGradientFiniteDifference)->Unit(benchmark::kMillisecond);

}  // namespace
