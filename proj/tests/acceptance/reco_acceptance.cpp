// Acceptance run. Prints one PASS/FAIL line per criterion and exits 4 when
// any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <unistd.h>
#include <vector>

#include "reco/cache.hpp"
#include "reco/diagnostics.hpp"
#include "reco/dpo.hpp"
#include "reco/error.hpp"
#include "reco/experiment.hpp"
#include "reco/ga_check.hpp"
#include "reco/hash.hpp"
#include "reco/metrics.hpp"
#include "reco/rng.hpp"
#include "reco/toy_vlm.hpp"

using namespace reco;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;  // 0 means no runtime bound
  std::function<Verdict()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

Verdict identity_extension() {
  const ToyVlm model{VlmConfig{}};
  const auto scenes = random_scenes(50, model.config().n_obj, 101);
  const auto id = identity_init(model.dim());
  std::size_t steps = 0, mismatched = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (DecodeMode mode : {DecodeMode::Greedy, DecodeMode::Sample}) {
      DecodeOptions o{96, mode, 1.0, 500 + i, true};
      const auto base = model.generate(scenes[i], std::vector<Token>{kBos}, o);
      const auto with = model.generate(scenes[i], std::vector<Token>{kBos}, o, &id);
      steps += base.tokens.size();
      if (base.tokens != with.tokens || !same_bits(base.logits, with.logits)) ++mismatched;
    }
  }
  return {mismatched == 0, fmt("%zu rollouts, %zu steps, %zu mismatched", scenes.size() * 2, steps,
                               mismatched)};
}

Verdict fading_memory() {
  const experiment::Protocol p;
  const ToyVlm model(p.model);
  const auto scenes = random_scenes(p.test_scenes, p.model.n_obj, p.test_scene_seed);
  const auto curve = diag::influence_curve(model, scenes, std::vector<Token>{kBos}, p.t_max);
  const double early = curve.window_mean(p.early.begin, p.early.end);
  const double late = curve.window_mean(p.late.begin, p.late.end);
  return {late <= 0.25 * early, fmt("early %.4f late %.6f ratio %.5f (need <= 0.25)", early, late,
                                    late / early)};
}

// The end-to-end run is shared by the two criteria that need a trained head.
double g_trained_seconds = 0.0;

const experiment::Outcome& trained_run() {
  static const experiment::Outcome outcome = [] {
    const auto t0 = std::chrono::steady_clock::now();
    auto o = experiment::run(experiment::Protocol{});
    g_trained_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  }();
  return outcome;
}

Verdict restores_influence() {
  const auto& o = trained_run();
  const double base = o.base.late_hellinger, reco = o.reco.late_hellinger;
  const bool loss_fell = o.training.epoch_losses.back() < o.training.epoch_losses.front();
  return {reco >= 3.0 * base && loss_fell,
          fmt("late window base %.6f reco %.4f (x%.1f, need >= 3); %zu pairs; loss %.4f -> %.4f",
              base, reco, reco / base, o.preference_pairs, o.training.epoch_losses.front(),
              o.training.epoch_losses.back())};
}

Verdict hallucination_reduction() {
  const auto& o = trained_run();
  const auto& b = o.base;
  const auto& r = o.reco;
  const bool pass = r.chair_i.value <= 0.7 * b.chair_i.value && r.chair_s.value < b.chair_s.value;
  return {pass, fmt("CHAIR_i %.4f -> %.4f (x%.3f, need <= 0.7); CHAIR_s %.4f -> %.4f; "
                    "mentions %zu -> %zu",
                    b.chair_i.value, r.chair_i.value, r.chair_i.value / b.chair_i.value,
                    b.chair_s.value, r.chair_s.value, b.chair_i.total, r.chair_i.total)};
}

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

dpo::PreferenceQuad random_quad(std::size_t d, std::size_t v, SplitMix64& rng) {
  auto segment = [&] {
    const std::size_t n = 1 + rng.below(4);
    dpo::AnswerSegment s{random_matrix(n, d, rng), {}};
    for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(static_cast<Token>(rng.below(v)));
    return s;
  };
  dpo::PreferenceQuad q;
  q.image_bundle.resize(d);
  for (double& x : q.image_bundle) x = rng.normal();
  q.chosen = segment();
  q.rejected = segment();
  return q;
}

ReCoParams near_identity(std::size_t d, SplitMix64& rng) {
  Matrix wt = Matrix::identity(d);
  for (double& x : wt.data()) x += 0.2 * rng.normal();
  return ReCoParams(wt, random_matrix(d, d, rng, 0.2));
}

Verdict gradient_oracle() {
  SplitMix64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8), v = 2 + rng.below(15);
    const Matrix head = random_matrix(v, d, rng);
    std::vector<dpo::PreferenceQuad> quads;
    for (std::size_t i = 0; i < 1 + rng.below(4); ++i) quads.push_back(random_quad(d, v, rng));
    const auto ref = near_identity(d, rng);
    const auto policy = near_identity(d, rng);
    const dpo::DpoConfig cfg;
    const auto ga = dpo::grad_analytic(head, policy, ref, quads, cfg);
    const auto gf = dpo::grad_fd(head, policy, ref, quads, cfg, 1e-5);
    dpo::Gradient diff = ga;
    axpy(-1.0, gf.d_text.data(), diff.d_text.data());
    axpy(-1.0, gf.d_image.data(), diff.d_image.data());
    worst = std::max(worst, diff.max_abs() / (gf.max_abs() + 1e-12));
  }
  return {worst <= 1e-6, fmt("20 instances, worst relative error %.3e (need <= 1e-6)", worst)};
}

Verdict ga_suite() {
  ga::GaCheckOptions o;
  o.trials = 1000;
  const auto report = ga::run_ga_checks(o);
  std::string detail;
  for (const auto& p : report.properties) {
    if (!detail.empty()) detail += "; ";
    detail += fmt("%s %s", p.name.c_str(), p.passed() ? "ok" : "FAILED");
  }
  return {report.passed(), detail};
}

// Independent brute-force metric oracles on bitmask and tally representations.
Verdict metric_oracles() {
  using namespace metrics;
  SplitMix64 rng(77);
  std::size_t bad = 0;
  auto to_set = [](std::uint32_t m) {
    ObjectSet s;
    for (int b = 0; b < 32; ++b)
      if (m >> b & 1u) s.insert(b);
    return s;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<CaptionEval> evals;
    std::uint64_t mentioned = 0, halluc = 0, sentences = 0, halluc_sent = 0;
    for (std::size_t c = 0; c < 1 + rng.below(4); ++c) {
      const std::uint32_t universe = 1u << (1 + rng.below(10));
      const auto truth = static_cast<std::uint32_t>(rng.below(universe));
      CaptionEval e{{}, to_set(truth)};
      std::uint32_t all = 0;
      for (std::size_t s = 0; s < 1 + rng.below(4); ++s) {
        const auto m = static_cast<std::uint32_t>(rng.below(universe));
        e.sentences.push_back(to_set(m));
        all |= m;
        ++sentences;
        halluc_sent += (m & ~truth) != 0;
      }
      mentioned += std::popcount(all);
      halluc += std::popcount(all & ~truth);
      evals.push_back(std::move(e));
    }
    const auto ci = chair_i(evals);
    const auto cs = chair_s(evals);
    const double ci_expect = mentioned ? double(halluc) / double(mentioned) : 0.0;
    bad += ci.value != ci_expect || ci.total != mentioned || ci.hallucinated != halluc;
    bad += cs.value != double(halluc_sent) / double(sentences);
  }
  for (int trial = 0; trial < 1000; ++trial) {
    BinaryEval e;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0, n = 0, pairs_ok = 0;
    const std::size_t pairs = 1 + rng.below(6);
    for (std::size_t p = 0; p < pairs; ++p) {
      bool ok = true;
      for (int k = 0; k < 2; ++k, ++n) {
        const auto a = rng.below(3);
        const bool yes = rng.below(2) == 1;
        tp += a == 0 && yes;
        fp += a == 0 && !yes;
        fn += a == 1 && yes;
        tn += a == 1 && !yes;
        ok = ok && ((a == 0 && yes) || (a == 1 && !yes));
        e.items.push_back({a == 0 ? Answer::Yes : a == 1 ? Answer::No : Answer::Unparseable, yes,
                           "pair" + std::to_string(p)});
      }
      pairs_ok += ok;
    }
    bad += accuracy_plus(e) != double(pairs_ok) / double(pairs);
    if (tp + fp + tn + fn == 0) {
      try {
        pope_scores(e);
        ++bad;
      } catch (const Error&) {
      }
      continue;
    }
    const auto s = pope_scores(e);
    const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    bad += s.tp != tp || s.fp != fp || s.tn != tn || s.fn != fn;
    bad += s.accuracy != double(tp + tn) / double(n) || s.precision != prec || s.recall != rec ||
           s.f1 != f1 || s.answer_rate != double(tp + fp + tn + fn) / double(n);
    const double c = double(rng.below(101)), f = double(rng.below(101));
    bad += amber_score(c, f) != (100.0 - c + f) / 2.0;
  }
  const bool amber_ok = amber_score(10, 80) == 85.0;

  SplitMix64 g(5);
  const std::size_t d = 6, v = 12;
  const Matrix head = random_matrix(v, d, g);
  std::vector<dpo::PreferenceQuad> quads;
  for (int i = 0; i < 8; ++i) quads.push_back(random_quad(d, v, g));
  dpo::DpoConfig cfg;
  cfg.lambda = 0.0;
  const auto ref = near_identity(d, g);
  const double ln2_err = std::abs(dpo::dpo_loss(head, ref, ref, quads, cfg) - std::log(2.0));

  return {bad == 0 && amber_ok && ln2_err <= 1e-12,
          fmt("%zu oracle mismatches over 2000 instances; AMBER(10,80)=%g; |L-ln2|=%.1e", bad,
              amber_score(10, 80), ln2_err)};
}

Verdict cache_round_trip() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("reco_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  SplitMix64 rng(31);
  auto floats = [&](std::size_t n) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal());
    return v;
  };
  auto record = [&](std::uint32_t d) {
    cache::TraceRecord r;
    r.example_id = "scene-" + std::to_string(rng.below(1000));
    r.d = d;
    r.image_tokens = static_cast<std::uint32_t>(rng.below(6));
    r.image_embeddings = floats(r.image_tokens * d);
    for (cache::Segment* s : {&r.prompt, &r.chosen, &r.rejected}) {
      const std::size_t n = rng.below(7);
      for (std::size_t i = 0; i < n; ++i) s->token_ids.push_back(static_cast<Token>(rng.below(64)));
      s->hidden_states = floats(n * d);
    }
    r.source = {"toy-vlm", "recurrent state", std::to_string(rng.next())};
    return r;
  };

  std::size_t sets = 0, mismatched = 0, undetected = 0, flips = 0;
  for (int trial = 0; trial < 100; ++trial, ++sets) {
    const auto d = static_cast<std::uint32_t>(1 + rng.below(8));
    std::vector<cache::TraceRecord> recs;
    for (std::size_t i = 0; i < rng.below(5); ++i) recs.push_back(record(d));
    const fs::path path = dir / "fuzz.reco";
    cache::write_cache(recs, path, d);
    mismatched += cache::read_cache(path) != recs;

    if (trial % 10 != 0 || recs.empty()) continue;
    std::vector<std::byte> bytes(fs::file_size(path));
    {
      std::FILE* f = std::fopen(path.c_str(), "rb");
      if (f == nullptr || std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) ++mismatched;
      if (f != nullptr) std::fclose(f);
    }
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      auto bad = bytes;
      bad[i] ^= std::byte{static_cast<unsigned char>(1 + rng.below(255))};
      ++flips;
      try {
        cache::decode_cache(bad);
        ++undetected;
      } catch (const Error&) {
      }
    }
  }
  fs::remove_all(dir);
  return {mismatched == 0 && undetected == 0 && flips > 0,
          fmt("%zu record sets round-tripped, %zu mismatched; %zu single-byte corruptions, "
              "%zu undetected",
              sets, mismatched, flips, undetected)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "identity extension", 5.0, identity_extension},
      {2, "fading memory", 30.0, fading_memory},
      {3, "ReCo restores image influence", 300.0, restores_influence},
      {4, "hallucination reduction", 300.0, hallucination_reduction},
      {5, "gradient oracle", 10.0, gradient_oracle},
      {6, "geometric algebra suite", 5.0, ga_suite},
      {7, "metric oracles", 0.0, metric_oracles},
      {8, "cache round trip", 5.0, cache_round_trip},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Criteria 3 and 4 share one training run; each is charged its full cost.
    if (c.id == 3 || c.id == 4) seconds = std::max(seconds, g_trained_seconds);
    const bool in_time = c.budget_seconds == 0.0 || seconds < c.budget_seconds;
    const bool pass = v.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title,
                v.detail.c_str(), seconds,
                in_time ? "" : fmt(", over the %.0f s budget", c.budget_seconds).c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 4;
}
