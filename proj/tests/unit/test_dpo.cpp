#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "reco/dpo.hpp"
#include "reco/error.hpp"
#include "reco/preference.hpp"
#include "reco/rng.hpp"
#include "reco/simulate.hpp"
#include "test_util.hpp"

using namespace reco;
using namespace reco::dpo;
using reco::test::kind_of;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data()) x = scale * rng.normal();
  return m;
}

AnswerSegment random_segment(std::size_t n, std::size_t d, std::size_t v, SplitMix64& rng) {
  AnswerSegment s{random_matrix(n, d, rng), {}};
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back(static_cast<Token>(rng.below(v)));
  return s;
}

PreferenceQuad random_quad(std::size_t d, std::size_t v, SplitMix64& rng) {
  PreferenceQuad q;
  q.image_bundle.resize(d);
  for (double& x : q.image_bundle) x = rng.normal();
  q.chosen = random_segment(1 + rng.below(4), d, v, rng);
  q.rejected = random_segment(1 + rng.below(4), d, v, rng);
  return q;
}

ReCoParams perturbed_identity(std::size_t d, SplitMix64& rng, double scale) {
  Matrix wt = Matrix::identity(d);
  for (double& x : wt.data()) x += scale * rng.normal();
  return ReCoParams(wt, random_matrix(d, d, rng, scale));
}

// log softmax(H b)[w], written out without the library helpers.
double hand_logp(const Matrix& h, const Vec& b, Token w) {
  std::vector<double> z(h.rows(), 0.0);
  for (std::size_t r = 0; r < h.rows(); ++r)
    for (std::size_t c = 0; c < h.cols(); ++c) z[r] += h(r, c) * b[c];
  double s = 0.0;
  for (double x : z) s += std::exp(x);
  return z[w] - std::log(s);
}

Vec hand_compose(const ReCoParams& p, std::span<const double> t, const Vec& img) {
  const std::size_t d = p.dim();
  Vec out(d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r] += p.w_text()(r, c) * t[c] + p.w_image()(r, c) * img[c];
  return out;
}

double hand_seq(const Matrix& h, const ReCoParams& p, const AnswerSegment& s, const Vec& img) {
  double total = 0.0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i)
    total += hand_logp(h, hand_compose(p, s.states.row(i), img), s.tokens[i]);
  return total;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  DpoConfig c;
  CHECK(c.beta == 0.8);
  CHECK(c.lambda == 0.2);
  CHECK(c.lr == 5e-3);
  CHECK(c.epochs == 10);
  CHECK(c.batch_size == 128);
  CHECK(c.optimizer == Optimizer::GradientDescent);
  CHECK_NOTHROW(c.validate());
  c.beta = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = DpoConfig{};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = DpoConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);

  DpoConfig j;
  j.beta = 0.5;
  j.optimizer = Optimizer::Adam;
  j.seed = 9;
  const auto back = dpo::config_from_json(dpo::config_to_json(j));
  CHECK(back.beta == 0.5);
  CHECK(back.optimizer == Optimizer::Adam);
  CHECK(back.seed == 9);
  CHECK(kind_of([] { dpo::config_from_json(R"({"betta": 1})"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { dpo::config_from_json(R"({"optimizer": "rmsprop"})"); }) == ErrorKind::Parse);
}

TEST_CASE("seq_logprob hand oracle, V = 2") {
  Matrix h = Matrix::identity(2);
  AnswerSegment s{Matrix(1, 2), {1}};
  s.states(0, 0) = 0.3;
  s.states(0, 1) = -0.2;
  const double expect = -0.2 - std::log(std::exp(0.3) + std::exp(-0.2));
  CHECK(seq_logprob(h, nullptr, s, Vec{}) == doctest::Approx(expect).epsilon(1e-15));
  const auto id = identity_init(2);
  CHECK(seq_logprob(h, &id, s, Vec{5, 5}) == seq_logprob(h, nullptr, s, Vec{}));

  SplitMix64 rng(1);
  const auto seg = random_segment(7, 3, 6, rng);
  CHECK(seq_logprob(Matrix(6, 3), nullptr, seg, Vec{}) == doctest::Approx(7 * std::log(1.0 / 6)));
  AnswerSegment bad{Matrix(1, 2), {2}};
  CHECK(kind_of([&] { seq_logprob(h, nullptr, bad, Vec{}); }) == ErrorKind::OutOfRange);
}

TEST_CASE("loss is ln 2 at the reference with lambda = 0") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8), v = 2 + rng.below(15);
    const Matrix head = random_matrix(v, d, rng);
    std::vector<PreferenceQuad> quads;
    for (int i = 0; i < 5; ++i) quads.push_back(random_quad(d, v, rng));
    const auto ref = perturbed_identity(d, rng, 0.3);
    DpoConfig cfg;
    cfg.lambda = 0.0;
    CHECK(std::abs(dpo_loss(head, ref, ref, quads, cfg) - std::log(2.0)) <= 1e-12);
  }
}

TEST_CASE("loss hand oracle, V = 3 and two-token answers") {
  Matrix head(3, 2);
  head(0, 0) = 1.0, head(0, 1) = 0.0;
  head(1, 0) = 0.0, head(1, 1) = 1.0;
  head(2, 0) = -0.5, head(2, 1) = 0.5;
  PreferenceQuad q;
  q.image_bundle = {0.4, -0.2};
  q.chosen = {Matrix(2, 2), {0, 2}};
  q.chosen.states(0, 0) = 0.1, q.chosen.states(0, 1) = 0.7;
  q.chosen.states(1, 0) = -0.3, q.chosen.states(1, 1) = 0.2;
  q.rejected = {Matrix(2, 2), {1, 1}};
  q.rejected.states(0, 0) = 0.5, q.rejected.states(0, 1) = -0.6;
  q.rejected.states(1, 0) = 0.0, q.rejected.states(1, 1) = 0.9;

  Matrix wt = Matrix::identity(2), wi(2, 2);
  wt(0, 1) = 0.2;
  wi(0, 0) = 0.5, wi(1, 1) = -0.25;
  const ReCoParams policy(wt, wi);
  const ReCoParams ref = identity_init(2);
  DpoConfig cfg;

  const double lc = hand_seq(head, policy, q.chosen, q.image_bundle);
  const double lr = hand_seq(head, policy, q.rejected, q.image_bundle);
  const double lc0 = hand_seq(head, ref, q.chosen, q.image_bundle);
  const double lr0 = hand_seq(head, ref, q.rejected, q.image_bundle);
  const double m = 0.8 * ((lc - lc0) - (lr - lr0));
  const double expect = -std::log(1.0 / (1.0 + std::exp(-m))) + 0.2 * (-lc / 2.0);
  CHECK(dpo_loss(head, policy, ref, std::vector<PreferenceQuad>{q}, cfg) ==
        doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("larger beta lowers the loss when the chosen margin is positive") {
  SplitMix64 rng(3);
  const std::size_t d = 4, v = 6;
  const Matrix head = random_matrix(v, d, rng);
  const auto quad = random_quad(d, v, rng);
  const auto ref = identity_init(d);
  const auto policy = perturbed_identity(d, rng, 0.5);
  DpoConfig cfg;
  cfg.lambda = 0.0;
  const std::vector<PreferenceQuad> b{quad};
  const double lc = seq_logprob(head, &policy, quad.chosen, quad.image_bundle) -
                    seq_logprob(head, &ref, quad.chosen, quad.image_bundle);
  const double lr = seq_logprob(head, &policy, quad.rejected, quad.image_bundle) -
                    seq_logprob(head, &ref, quad.rejected, quad.image_bundle);
  const double sign = (lc - lr) > 0 ? 1.0 : -1.0;
  const double l1 = dpo_loss(head, policy, ref, b, cfg);
  cfg.beta *= 2;
  const double l2 = dpo_loss(head, policy, ref, b, cfg);
  CHECK(sign * (l1 - l2) > 0.0);
}

TEST_CASE("analytic gradient matches central differences") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8), v = 2 + rng.below(15);
    const Matrix head = random_matrix(v, d, rng);
    std::vector<PreferenceQuad> quads;
    for (std::size_t i = 0; i < 1 + rng.below(4); ++i) quads.push_back(random_quad(d, v, rng));
    const auto ref = perturbed_identity(d, rng, 0.2);
    const auto policy = perturbed_identity(d, rng, 0.2);
    DpoConfig cfg;
    cfg.lambda = trial % 3 == 0 ? 0.0 : 0.2;
    const auto ga = grad_analytic(head, policy, ref, quads, cfg);
    const auto gf = grad_fd(head, policy, ref, quads, cfg, 1e-5);
    Gradient diff = ga;
    axpy(-1.0, gf.d_text.data(), diff.d_text.data());
    axpy(-1.0, gf.d_image.data(), diff.d_image.data());
    const double rel = diff.max_abs() / (gf.max_abs() + 1e-12);
    INFO("trial " << trial << " d=" << d << " V=" << v);
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("gradient structure") {
  SplitMix64 rng(5);
  const std::size_t d = 3, v = 5;
  const Matrix head = random_matrix(v, d, rng);
  auto quad = random_quad(d, v, rng);
  quad.image_bundle.assign(d, 0.0);
  const auto policy = perturbed_identity(d, rng, 0.3);
  const std::vector<PreferenceQuad> b{quad};
  DpoConfig cfg;
  const auto g = grad_analytic(head, policy, identity_init(d), b, cfg);
  for (double x : g.d_image.data()) CHECK(x == 0.0);

  // lr is irrelevant to the gradient.
  DpoConfig other = cfg;
  other.lr = 0.7;
  CHECK(grad_analytic(head, policy, identity_init(d), b, other).d_text == g.d_text);

  // At policy = reference the DPO part vanishes, leaving λ times the SFT gradient.
  auto q2 = random_quad(d, v, rng);
  const std::vector<PreferenceQuad> b2{q2};
  DpoConfig sft;
  sft.lambda = 1.0;
  const auto ref = perturbed_identity(d, rng, 0.3);
  const auto g_dpo = grad_analytic(head, ref, ref, b2, cfg);
  const auto g_sft = grad_analytic(head, ref, ref, b2, sft);
  DpoConfig pure;
  pure.lambda = 0.0;
  const auto g_pure = grad_analytic(head, ref, ref, b2, pure);
  for (std::size_t i = 0; i < d * d; ++i) {
    const double dpo_only = g_pure.d_text.data()[i];
    CHECK(g_dpo.d_text.data()[i] ==
          doctest::Approx(dpo_only + 0.2 * (g_sft.d_text.data()[i] - dpo_only)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(grad_analytic(head, ref, ref, std::vector<PreferenceQuad>{}, cfg), Error);
  CHECK_THROWS_AS(grad_fd(head, ref, ref, b2, cfg, 0.0), Error);
}

TEST_CASE("training with lr = 0 leaves the parameters unchanged") {
  SplitMix64 rng(6);
  const std::size_t d = 4, v = 7;
  const Matrix head = random_matrix(v, d, rng);
  std::vector<PreferenceQuad> quads;
  for (int i = 0; i < 10; ++i) quads.push_back(random_quad(d, v, rng));
  DpoConfig cfg;
  cfg.lr = 0.0;
  cfg.batch_size = 3;
  const auto res = train(head, quads, cfg, identity_init(d));
  CHECK(res.params == identity_init(d));
  REQUIRE(res.epoch_losses.size() == 10);
  for (double l : res.epoch_losses) CHECK(l == res.epoch_losses.front());
  CHECK(res.updates == 10 * 4);
}

TEST_CASE("one quad overfits with lambda = 0") {
  SplitMix64 rng(7);
  const std::size_t d = 4, v = 6;
  const Matrix head = random_matrix(v, d, rng);
  std::vector<PreferenceQuad> quads{random_quad(d, v, rng)};
  DpoConfig cfg;
  cfg.lambda = 0.0;
  cfg.lr = 0.05;
  cfg.epochs = 1500;
  const auto res = train(head, quads, cfg, identity_init(d));
  CHECK(res.epoch_losses.front() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < res.epoch_losses.size(); ++i)
    CHECK(res.epoch_losses[i] <= res.epoch_losses[i - 1]);
  CHECK(res.epoch_losses.back() < 0.05);
}

TEST_CASE("training is deterministic and independent of thread count") {
  SplitMix64 rng(8);
  const std::size_t d = 5, v = 9;
  const Matrix head = random_matrix(v, d, rng);
  std::vector<PreferenceQuad> quads;
  for (int i = 0; i < 40; ++i) quads.push_back(random_quad(d, v, rng));
  DpoConfig cfg;
  cfg.batch_size = 16;
  cfg.lr = 0.05;
  ::setenv("RECO_LAB_THREADS", "1", 1);
  const auto a = train(head, quads, cfg, identity_init(d));
  ::setenv("RECO_LAB_THREADS", "4", 1);
  const auto b = train(head, quads, cfg, identity_init(d));
  ::unsetenv("RECO_LAB_THREADS");
  CHECK(a.params == b.params);
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());

  cfg.seed = 1;
  const auto c = train(head, quads, cfg, identity_init(d));
  CHECK_FALSE(c.params == a.params);

  cfg.optimizer = Optimizer::Adam;
  cfg.lr = 0.01;
  const auto adam = train(head, quads, cfg, identity_init(d));
  CHECK(adam.epoch_losses.back() < adam.epoch_losses.front());
}

TEST_CASE("training from a cache file") {
  test::TempDir dir;
  VlmConfig vc;
  vc.d = 8;
  vc.vocab = 24;
  vc.n_obj = 8;
  const ToyVlm model(vc);
  const auto scenes = random_scenes(12, vc.n_obj, 3);
  DecodeOptions o;
  o.max_len = 16;
  o.mode = DecodeMode::Sample;
  const auto caps = caption_scenes(model, scenes, kDefaultPrompt, o);
  const auto recs = synthesize_preferences(model, scenes, caps, kDefaultPrompt, 1);
  const auto path = dir.path() / "train.reco";
  cache::write_cache(recs, path);

  DpoConfig cfg;
  cfg.epochs = 2;
  const auto res = train(model.head(), path, cfg, identity_init(vc.d));
  CHECK(res.epoch_losses.size() == 2);

  std::vector<PreferenceQuad> quads;
  for (const auto& r : cache::read_cache(path)) quads.push_back(quad_from_record(r));
  const auto direct = train(model.head(), quads, cfg, identity_init(vc.d));
  CHECK(direct.params == res.params);

  CHECK(kind_of([&] { train(model.head(), dir.path() / "nope.reco", cfg, identity_init(vc.d)); }) ==
        ErrorKind::Io);
  const Matrix wrong(24, 4);
  CHECK(kind_of([&] { train(wrong, path, cfg, identity_init(4)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("quads from records keep the image bundle in binary64") {
  VlmConfig vc;
  vc.d = 4;
  vc.vocab = 12;
  vc.n_obj = 4;
  const ToyVlm model(vc);
  SceneSpec s;
  s.objects = {1, 3};
  const std::vector<Token> prompt{kBos}, chosen{5, kPeriod}, rejected{6, kPeriod};
  const auto rec = make_preference_record(model, s, prompt, chosen, rejected, "x");
  const auto q = quad_from_record(rec);
  CHECK(q.chosen.tokens == chosen);
  CHECK(q.rejected.tokens == rejected);
  CHECK(q.chosen.states.rows() == 2);
  Vec expect(4, 0.0);
  for (std::size_t j = 0; j < rec.image_tokens; ++j)
    for (std::size_t c = 0; c < 4; ++c) expect[c] += static_cast<double>(rec.image_embeddings[j * 4 + c]);
  for (std::size_t c = 0; c < 4; ++c) CHECK(q.image_bundle[c] == doctest::Approx(expect[c]).epsilon(1e-15));

  auto empty = rec;
  empty.chosen = {};
  CHECK_THROWS_AS(quad_from_record(empty), Error);
}
