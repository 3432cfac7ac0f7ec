#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "reco/cache.hpp"
#include "reco/rng.hpp"

namespace {

using namespace reco;

std::vector<cache::TraceRecord> records(std::size_t count, std::uint32_t d) {
  SplitMix64 rng(8);
  auto floats = [&](std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  std::vector<cache::TraceRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& r = out[i];
    r.example_id = "scene-" + std::to_string(i);
    r.d = d;
    r.image_tokens = 8;
    r.image_embeddings = floats(8 * d);
    for (auto* s : {&r.prompt, &r.chosen, &r.rejected}) {
      const std::size_t n = s == &r.prompt ? 1 : 48;
      s->token_ids.assign(n, 5);
      s->hidden_states = floats(n * d);
    }
    r.source = {"toy-vlm", "recurrent state h_t, pre-head", "0123456789abcdef"};
  }
  return out;
}

std::filesystem::path scratch() {
  return std::filesystem::temp_directory_path() /
         ("reco_bench_" + std::to_string(::getpid()) + ".reco");
}

void BM_CacheWrite(benchmark::State& state) {
  const auto recs = records(static_cast<std::size_t>(state.range(0)), 32);
  const auto path = scratch();
  for (auto _ : state) benchmark::DoNotOptimize(cache::write_cache(recs, path));
  state.SetBytesProcessed(state.iterations() *
                          static_cast<std::int64_t>(std::filesystem::file_size(path)));
  std::filesystem::remove(path);
}
BENCHMARK(BM_CacheWrite)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_CacheRead(benchmark::State& state) {
  const auto recs = records(static_cast<std::size_t>(state.range(0)), 32);
  const auto path = scratch();
  cache::write_cache(recs, path);
  for (auto _ : state) benchmark::DoNotOptimize(cache::read_cache(path));
  state.SetBytesProcessed(state.iterations() *
                          static_cast<std::int64_t>(std::filesystem::file_size(path)));
  std::filesystem::remove(path);
}
BENCHMARK(BM_CacheRead)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
