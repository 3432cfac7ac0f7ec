#include <benchmark/benchmark.h>

#include "reco/reco_params.hpp"
#include "reco/rng.hpp"
#include "reco/toy_vlm.hpp"

namespace {

using namespace reco;

Vec random_vec(std::size_t n, SplitMix64& rng) {
  Vec v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

void BM_Compose(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  SplitMix64 rng(3);
  Matrix wt(d, d), wi(d, d);
  for (double& x : wt.data()) x = rng.normal();
  for (double& x : wi.data()) x = rng.normal();
  const ReCoParams p(wt, wi);
  const Vec t = random_vec(d, rng), img = random_vec(d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(compose(p, t, img));
}
BENCHMARK(BM_Compose)->RangeMultiplier(2)->Range(8, 128);

void BM_NextTokenLogits(benchmark::State& state) {
  const ToyVlm model{VlmConfig{}};
  SplitMix64 rng(4);
  const Vec h = random_vec(model.dim(), rng);
  const Vec img = random_vec(model.dim(), rng);
  const auto id = identity_init(model.dim());
  const bool with_reco = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(h, with_reco ? &id : nullptr, img));
}
BENCHMARK(BM_NextTokenLogits)->Arg(0)->Arg(1);

void BM_Generate96(benchmark::State& state) {
  const ToyVlm model{VlmConfig{}};
  const auto scenes = random_scenes(1, model.config().n_obj, 5);
  DecodeOptions o;
  o.mode = DecodeMode::Sample;
  const std::vector<Token> prompt{kBos};
  for (auto _ : state) benchmark::DoNotOptimize(model.generate(scenes[0], prompt, o));
}
BENCHMARK(BM_Generate96);

}  // namespace
