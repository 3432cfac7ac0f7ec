#include "reco/toy_vlm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "reco/error.hpp"
#include "reco/ga.hpp"
#include "reco/hash.hpp"

namespace reco {

namespace {

constexpr std::uint64_t kImageStream = 0x494d414745ULL;    // "IMAGE"
constexpr std::uint64_t kScenesStream = 0x5343454e45ULL;   // "SCENE"
constexpr std::uint64_t kCorrectStream = 0x4649584dULL;    // "FIXM"

void fill_normal(Matrix& m, SplitMix64& rng, double scale) {
  for (double& x : m.data()) x = scale * rng.normal();
}

void hash_matrix(Fnv1a64& h, const Matrix& m) {
  h.update(std::as_bytes(m.data()));
}

}  // namespace

void VlmConfig::validate() const {
  auto bad = [](const char* what) { fail(ErrorKind::InvalidArgument, what); };
  if (d < 1) bad("d must be >= 1");
  if (vocab < 1) bad("vocab must be >= 1");
  if (image_tokens < 1) bad("image_tokens must be >= 1");
  if (n_obj < 1) bad("n_obj must be >= 1");
  if (vocab < kReservedTokens || n_obj > vocab - kReservedTokens)
    bad("n_obj must be <= vocab - 4 (BOS/EOS/period/pad are reserved)");
  if (!(gamma0 >= 0.0) || !std::isfinite(gamma0)) bad("gamma0 must be finite and >= 0");
  if (!(rho > 0.0 && rho <= 1.0)) bad("rho must be in (0, 1]");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) bad("jitter must be finite and >= 0");
  if (!(embed_scale > 0.0) || !std::isfinite(embed_scale)) bad("embed_scale must be > 0");
  for (double g : {object_gain, filler_gain, period_gain})
    if (!std::isfinite(g)) bad("head gains must be finite");
}

void SceneSpec::validate(std::size_t n_obj) const {
  require(!objects.empty(), ErrorKind::InvalidArgument, "scene has no objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    require(objects[i] >= 0 && static_cast<std::size_t>(objects[i]) < n_obj,
            ErrorKind::OutOfRange, "scene object id out of range");
    require(i == 0 || objects[i - 1] < objects[i], ErrorKind::InvalidArgument,
            "scene objects must be sorted and distinct");
  }
}

bool SceneSpec::contains(int object) const {
  return std::binary_search(objects.begin(), objects.end(), object);
}

ToyVlm::ToyVlm(VlmConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.d;
  const std::size_t v = config_.vocab;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  SplitMix64 rng(config_.seed);

  bases_ = Matrix(config_.n_obj, d);
  for (std::size_t k = 0; k < config_.n_obj; ++k) {
    auto row = bases_.row(k);
    for (double& x : row) x = rng.normal();
    const double nrm = norm2(row);
    for (double& x : row) x /= nrm;
  }

  // Contractive recurrence: largest absolute row sum scaled to 0.9.
  a_ = Matrix(d, d);
  fill_normal(a_, rng, 1.0);
  double max_row = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    double s = 0.0;
    for (double x : a_.row(r)) s += std::abs(x);
    max_row = std::max(max_row, s);
  }
  for (double& x : a_.data()) x *= 0.9 / max_row;

  e_ = Matrix(v, d);
  fill_normal(e_, rng, inv_sqrt_d);

  // C undoes the embedding scale so the image drive on the state is O(M).
  c_ = Matrix(d, d);
  fill_normal(c_, rng, 0.1 * inv_sqrt_d);
  for (std::size_t i = 0; i < d; ++i) c_(i, i) += 1.0;
  for (double& x : c_.data()) x /= config_.embed_scale;

  h_ = Matrix(v, d);
  for (std::size_t r = 0; r < v; ++r) {
    auto row = h_.row(r);
    const auto tok = static_cast<Token>(r);
    if (tok == kPeriod) {
      for (double& x : row) x = config_.period_gain * rng.normal();
    } else if (is_object_token(tok)) {
      const auto base = bases_.row(r - kFirstObject);
      for (std::size_t c = 0; c < d; ++c) row[c] = config_.object_gain * base[c];
    } else if (r >= kReservedTokens) {
      for (double& x : row) x = config_.filler_gain * rng.normal();
    }
    // PAD, BOS and EOS rows stay zero.
  }

  finalize();
}

ToyVlm ToyVlm::from_weights(VlmConfig config, Matrix bases, Matrix a, Matrix e, Matrix c,
                            Matrix h) {
  config.validate();
  const std::size_t d = config.d;
  const std::size_t v = config.vocab;
  auto shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* what) {
    require(m.rows() == r && m.cols() == c, ErrorKind::DimensionMismatch, what);
  };
  shape(bases, config.n_obj, d, "bases must be n_obj x d");
  shape(a, d, d, "A must be d x d");
  shape(e, v, d, "E must be V x d");
  shape(c, d, d, "C must be d x d");
  shape(h, v, d, "H must be V x d");
  ToyVlm m;
  m.config_ = std::move(config);
  m.bases_ = std::move(bases);
  m.a_ = std::move(a);
  m.e_ = std::move(e);
  m.c_ = std::move(c);
  m.h_ = std::move(h);
  m.finalize();
  return m;
}

void ToyVlm::finalize() {
  Fnv1a64 wh;
  for (const Matrix* m : {&bases_, &a_, &e_, &c_, &h_}) hash_matrix(wh, *m);
  weights_checksum_ = wh.digest();

  // The fingerprint covers weights too, so hand-built models never collide
  // with seeded ones of the same config.
  Fnv1a64 ch;
  ch.update(config_to_json(config_));
  ch.update(to_hex(weights_checksum_));
  fingerprint_ = to_hex(ch.digest());
}

Token ToyVlm::object_token(int object) const {
  require(object >= 0 && static_cast<std::size_t>(object) < config_.n_obj, ErrorKind::OutOfRange,
          "object id out of range");
  return kFirstObject + static_cast<Token>(object);
}

bool ToyVlm::is_object_token(Token t) const noexcept {
  return t >= kFirstObject && t < kFirstObject + config_.n_obj;
}

void ToyVlm::check_token(Token w) const {
  require(w < config_.vocab, ErrorKind::OutOfRange, "token id out of vocabulary range");
}

std::vector<Vec> ToyVlm::encode_image(const SceneSpec& scene) const {
  scene.validate(config_.n_obj);
  const std::size_t d = config_.d;
  const double noise = config_.jitter / std::sqrt(static_cast<double>(d));
  SplitMix64 rng = SplitMix64::derive(scene.scene_seed, kImageStream);
  std::vector<Vec> out;
  out.reserve(config_.image_tokens);
  for (std::size_t j = 0; j < config_.image_tokens; ++j) {
    const int obj = scene.objects[j % scene.objects.size()];
    const auto base = bases_.row(static_cast<std::size_t>(obj));
    Vec e(d);
    for (std::size_t c = 0; c < d; ++c) {
      const double n = rng.normal();
      e[c] = config_.embed_scale * (base[c] + (noise == 0.0 ? 0.0 : noise * n));
    }
    out.push_back(std::move(e));
  }
  return out;
}

Vec ToyVlm::image_bundle(const SceneSpec& scene) const {
  return ga::bundle(encode_image(scene));
}

Vec ToyVlm::step(std::span<const double> h, Token w, std::span<const double> image_bundle,
                 std::size_t t, ImageChannel channel) const {
  const std::size_t d = config_.d;
  require(h.size() == d && image_bundle.size() == d, ErrorKind::DimensionMismatch,
          "step inputs must have dimension d");
  check_token(w);
  Vec pre = matvec(a_, h);
  axpy(1.0, e_.row(w), pre);
  if (channel == ImageChannel::On && config_.gamma0 != 0.0) {
    const double gain = config_.gamma0 * std::pow(config_.rho, static_cast<double>(t));
    axpy(gain, matvec(c_, image_bundle), pre);
  }
  for (double& x : pre) x = std::tanh(x);
  return pre;
}

Vec ToyVlm::logits(std::span<const double> h, const ReCoParams* reco,
                   std::span<const double> image_bundle) const {
  require(h.size() == config_.d, ErrorKind::DimensionMismatch, "state must have dimension d");
  if (reco == nullptr) return matvec(h_, h);
  require(reco->dim() == config_.d, ErrorKind::DimensionMismatch, "ReCo dimension != model d");
  return matvec(h_, compose(*reco, h, image_bundle));
}

Vec ToyVlm::next_token_dist(std::span<const double> h, const ReCoParams* reco,
                            std::span<const double> image_bundle) const {
  return softmax(logits(h, reco, image_bundle));
}

Token ToyVlm::choose(std::span<const double> logits, const DecodeOptions& opts,
                     SplitMix64& rng) const {
  if (opts.mode == DecodeMode::Greedy) {
    return static_cast<Token>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }
  require(opts.temperature > 0.0, ErrorKind::InvalidArgument, "temperature must be > 0");
  Vec scaled(logits.begin(), logits.end());
  for (double& z : scaled) z /= opts.temperature;
  const Vec p = softmax(scaled);
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    cum += p[i];
    if (u < cum) return static_cast<Token>(i);
  }
  return static_cast<Token>(p.size() - 1);
}

Generation ToyVlm::generate(const SceneSpec& scene, std::span<const Token> prompt,
                            const DecodeOptions& opts, const ReCoParams* reco) const {
  require(opts.max_len >= 1, ErrorKind::InvalidArgument, "max_len must be >= 1");
  const std::size_t d = config_.d;
  Generation g;
  g.trace.image_embeddings = Matrix(config_.image_tokens, d);
  const auto images = encode_image(scene);
  for (std::size_t j = 0; j < images.size(); ++j)
    std::copy(images[j].begin(), images[j].end(), g.trace.image_embeddings.row(j).begin());
  const Vec bundle = ga::bundle(images);
  g.trace.config_fingerprint = fingerprint_;

  Vec h(d, 0.0);
  std::size_t t = 0;
  for (Token w : prompt) h = step(h, w, bundle, t++);

  SplitMix64 rng(opts.seed);
  std::vector<Vec> states;
  std::vector<Vec> all_logits;
  for (std::size_t i = 0; i < opts.max_len; ++i) {
    Vec z = logits(h, reco, bundle);
    const Token w = choose(z, opts, rng);
    g.tokens.push_back(w);
    states.push_back(h);
    if (opts.record_logits) all_logits.push_back(std::move(z));
    if (w == kEos) break;
    h = step(h, w, bundle, t++);
  }

  g.trace.hidden_states = Matrix(states.size(), d);
  for (std::size_t i = 0; i < states.size(); ++i)
    std::copy(states[i].begin(), states[i].end(), g.trace.hidden_states.row(i).begin());
  g.trace.token_ids = g.tokens;
  if (opts.record_logits) {
    g.logits = Matrix(all_logits.size(), config_.vocab);
    for (std::size_t i = 0; i < all_logits.size(); ++i)
      std::copy(all_logits[i].begin(), all_logits[i].end(), g.logits.row(i).begin());
  }
  return g;
}

std::vector<DistPair> ToyVlm::dist_pair_with_without_image(const SceneSpec& scene,
                                                           std::span<const Token> prompt,
                                                           std::size_t t_max,
                                                           const ReCoParams* reco,
                                                           const DecodeOptions& opts) const {
  require(t_max >= 1, ErrorKind::InvalidArgument, "t_max must be >= 1");
  const std::size_t d = config_.d;
  const Vec bundle = image_bundle(scene);
  const Vec zero(d, 0.0);

  Vec h(d, 0.0);
  Vec h_blind(d, 0.0);
  std::size_t t = 0;
  for (Token w : prompt) {
    h = step(h, w, bundle, t);
    h_blind = step(h_blind, w, zero, t, ImageChannel::Off);
    ++t;
  }

  SplitMix64 rng(opts.seed);
  std::vector<DistPair> out;
  out.reserve(t_max);
  for (std::size_t i = 0; i < t_max; ++i) {
    const Vec z = logits(h, reco, bundle);
    DistPair pair{softmax(z), next_token_dist(h_blind, reco, zero)};
    const Token w = choose(z, opts, rng);
    out.push_back(std::move(pair));
    h = step(h, w, bundle, t);
    h_blind = step(h_blind, w, zero, t, ImageChannel::Off);
    ++t;
  }
  return out;
}

ToyVlm::TeacherForced ToyVlm::teacher_force(std::span<const double> image_bundle,
                                            std::span<const Token> prompt,
                                            std::span<const Token> answer) const {
  const std::size_t d = config_.d;
  TeacherForced out{Matrix(prompt.size(), d), Matrix(answer.size(), d)};
  Vec h(d, 0.0);
  std::size_t t = 0;
  for (std::size_t i = 0; i < prompt.size(); ++i) {
    std::copy(h.begin(), h.end(), out.prompt_states.row(i).begin());
    h = step(h, prompt[i], image_bundle, t++);
  }
  for (std::size_t i = 0; i < answer.size(); ++i) {
    std::copy(h.begin(), h.end(), out.answer_states.row(i).begin());
    h = step(h, answer[i], image_bundle, t++);
  }
  return out;
}

std::vector<SceneSpec> random_scenes(std::size_t count, std::size_t n_obj, std::uint64_t seed,
                                     std::size_t max_objects) {
  require(n_obj >= 1 && max_objects >= 1, ErrorKind::InvalidArgument,
          "random_scenes needs n_obj >= 1 and max_objects >= 1");
  SplitMix64 rng = SplitMix64::derive(seed, kScenesStream);
  const std::size_t cap = std::min(max_objects, n_obj);
  std::vector<SceneSpec> scenes;
  scenes.reserve(count);
  std::vector<int> pool(n_obj);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = 1 + rng.below(cap);
    for (std::size_t j = 0; j < n_obj; ++j) pool[j] = static_cast<int>(j);
    // Partial Fisher-Yates.
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + rng.below(n_obj - j);
      std::swap(pool[j], pool[pick]);
    }
    SceneSpec s;
    s.objects.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(s.objects.begin(), s.objects.end());
    s.scene_seed = rng.next();
    scenes.push_back(std::move(s));
  }
  return scenes;
}

std::vector<Token> correct_caption(const ToyVlm& model, const SceneSpec& scene,
                                   std::span<const Token> caption, std::uint64_t seed) {
  scene.validate(model.config().n_obj);
  SplitMix64 rng = SplitMix64::derive(seed, kCorrectStream);
  std::vector<Token> out(caption.begin(), caption.end());
  for (Token& w : out) {
    if (!model.is_object_token(w)) continue;
    const int obj = static_cast<int>(w - kFirstObject);
    if (scene.contains(obj)) continue;
    w = model.object_token(scene.objects[rng.below(scene.objects.size())]);
  }
  return out;
}

}  // namespace reco
