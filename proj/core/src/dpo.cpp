#include "reco/dpo.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reco/error.hpp"
#include "reco/ga.hpp"
#include "reco/parallel.hpp"
#include "reco/rng.hpp"

namespace reco::dpo {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;  // "SHUFF"

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AnswerSegment segment_from(const cache::Segment& s, std::size_t d) {
  return {cache::to_matrix(s.hidden_states, s.token_ids.size(), d), s.token_ids};
}

void check_segment(const AnswerSegment& s, std::size_t d, std::size_t vocab) {
  require(s.states.rows() == s.tokens.size() && (s.tokens.empty() || s.states.cols() == d),
          ErrorKind::DimensionMismatch, "segment states must be N x d");
  for (Token w : s.tokens)
    require(w < vocab, ErrorKind::OutOfRange, "answer token out of vocabulary range");
}

// Teacher-forced log-probability of one segment. When g_text/g_sum are
// non-null, also accumulates Σ_i g_i T_iᵀ and Σ_i g_i with
// g_i = dlogp_i/dB_i = Hᵀ(onehot(w_i) - p_i).
double segment_logprob(const Matrix& head, const ReCoParams* reco, const AnswerSegment& seg,
                       std::span<const double> image_term, Matrix* g_text, Vec* g_sum) {
  const std::size_t d = head.cols();
  const std::size_t vocab = head.rows();
  double total = 0.0;
  Vec g(d);
  for (std::size_t i = 0; i < seg.tokens.size(); ++i) {
    const auto t = seg.states.row(i);
    Vec b;
    if (reco == nullptr) {
      b.assign(t.begin(), t.end());
    } else {
      b = matvec(reco->w_text(), t);
      for (std::size_t r = 0; r < d; ++r) b[r] += image_term[r];
    }
    const Vec z = matvec(head, b);
    const double lse = log_sum_exp(z);
    const Token w = seg.tokens[i];
    total += z[w] - lse;
    if (g_text == nullptr) continue;

    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t k = 0; k < vocab; ++k) {
      const double coef = (k == w ? 1.0 : 0.0) - std::exp(z[k] - lse);
      axpy(coef, head.row(k), g);
    }
    rank1_update(*g_text, 1.0, g, t);
    axpy(1.0, g, *g_sum);
  }
  return total;
}

// W_I ī, accumulated exactly as compose() does so identity parameters stay
// bit-identical to the bare model.
Vec image_term(const ReCoParams& p, std::span<const double> bundle) {
  Vec out(p.dim(), 0.0);
  matvec_acc(p.w_image(), bundle, out);
  return out;
}

ReCoParams perturbed(const ReCoParams& p, bool text, std::size_t r, std::size_t c, double delta) {
  Matrix wt = p.w_text();
  Matrix wi = p.w_image();
  (text ? wt : wi)(r, c) += delta;
  return ReCoParams(std::move(wt), std::move(wi));
}

}  // namespace

std::string_view to_string(Optimizer o) {
  return o == Optimizer::Adam ? "adam" : "gd";
}

Optimizer optimizer_from_string(std::string_view s) {
  if (s == "gd" || s == "sgd" || s == "gradient-descent") return Optimizer::GradientDescent;
  if (s == "adam" || s == "adaptive-moment") return Optimizer::Adam;
  fail(ErrorKind::InvalidArgument, "unknown optimizer '" + std::string(s) + "'");
}

void DpoConfig::validate() const {
  require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument, "beta must be > 0");
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument, "lambda must be >= 0");
  require(lr >= 0.0 && std::isfinite(lr), ErrorKind::InvalidArgument, "lr must be >= 0");
  require(batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
              adam_eps > 0.0,
          ErrorKind::InvalidArgument, "adam moments must lie in [0, 1) with eps > 0");
}

std::string config_to_json(const DpoConfig& c) {
  const nlohmann::json j = {{"beta", c.beta},
                            {"lambda", c.lambda},
                            {"lr", c.lr},
                            {"epochs", c.epochs},
                            {"batch_size", c.batch_size},
                            {"optimizer", std::string(to_string(c.optimizer))},
                            {"seed", c.seed},
                            {"adam_beta1", c.adam_beta1},
                            {"adam_beta2", c.adam_beta2},
                            {"adam_eps", c.adam_eps}};
  return j.dump();
}

DpoConfig config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(ErrorKind::Parse, "DPO config is not a JSON object");
  static const std::set<std::string> known = {"beta",   "lambda",     "lr",         "epochs",
                                              "batch_size", "optimizer", "seed",     "adam_beta1",
                                              "adam_beta2", "adam_eps"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) fail(ErrorKind::Parse, "unknown DPO config field '" + key + "'");
  DpoConfig c;
  try {
    c.beta = j.value("beta", c.beta);
    c.lambda = j.value("lambda", c.lambda);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    if (j.contains("optimizer")) c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("DPO config: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string("DPO config: ") + e.what());
  }
  c.validate();
  return c;
}

DpoConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

PreferenceQuad quad_from_record(const cache::TraceRecord& r) {
  r.validate();
  require(!r.chosen.token_ids.empty() && !r.rejected.token_ids.empty(),
          ErrorKind::InvalidArgument, "chosen and rejected answers must be non-empty");
  const std::size_t d = r.d;
  PreferenceQuad q;
  if (r.image_tokens == 0) {
    q.image_bundle.assign(d, 0.0);
  } else {
    std::vector<Vec> images(r.image_tokens, Vec(d));
    for (std::size_t j = 0; j < r.image_tokens; ++j)
      for (std::size_t c = 0; c < d; ++c) images[j][c] = r.image_embeddings[j * d + c];
    q.image_bundle = ga::bundle(images);
  }
  q.chosen = segment_from(r.chosen, d);
  q.rejected = segment_from(r.rejected, d);
  return q;
}

Gradient& Gradient::operator+=(const Gradient& o) {
  axpy(1.0, o.d_text.data(), d_text.data());
  axpy(1.0, o.d_image.data(), d_image.data());
  return *this;
}

double Gradient::max_abs() const {
  return std::max(reco::max_abs(d_text.data()), reco::max_abs(d_image.data()));
}

double seq_logprob(const Matrix& head, const ReCoParams* reco, const AnswerSegment& seg,
                   std::span<const double> image_bundle) {
  const std::size_t d = head.cols();
  check_segment(seg, d, head.rows());
  if (reco == nullptr) return segment_logprob(head, nullptr, seg, {}, nullptr, nullptr);
  require(reco->dim() == d && image_bundle.size() == d, ErrorKind::DimensionMismatch,
          "ReCo/bundle dimension differs from head");
  const Vec term = image_term(*reco, image_bundle);
  return segment_logprob(head, reco, seg, term, nullptr, nullptr);
}

DpoObjective::DpoObjective(const Matrix& head, ReCoParams reference,
                           std::span<const PreferenceQuad> quads, DpoConfig cfg)
    : head_(head), reference_(std::move(reference)), quads_(quads), cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = head_.cols();
  require(reference_.dim() == d, ErrorKind::DimensionMismatch, "reference dimension != head d");
  ref_chosen_.resize(quads_.size());
  ref_rejected_.resize(quads_.size());
  for (std::size_t q = 0; q < quads_.size(); ++q) {
    const auto& quad = quads_[q];
    require(!quad.chosen.tokens.empty() && !quad.rejected.tokens.empty(),
            ErrorKind::InvalidArgument, "chosen and rejected answers must be non-empty");
    require(quad.image_bundle.size() == d, ErrorKind::DimensionMismatch, "bundle dimension != d");
    check_segment(quad.chosen, d, head_.rows());
    check_segment(quad.rejected, d, head_.rows());
  }
  parallel_for(quads_.size(), [&](std::size_t q) {
    const Vec term = image_term(reference_, quads_[q].image_bundle);
    ref_chosen_[q] = segment_logprob(head_, &reference_, quads_[q].chosen, term, nullptr, nullptr);
    ref_rejected_[q] =
        segment_logprob(head_, &reference_, quads_[q].rejected, term, nullptr, nullptr);
  });
}

DpoObjective::PerQuad DpoObjective::evaluate(const ReCoParams& policy, std::size_t q,
                                             bool want_grad) const {
  const auto& quad = quads_[q];
  const std::size_t d = head_.cols();
  const Vec term = image_term(policy, quad.image_bundle);

  PerQuad out;
  Matrix gc_text, gr_text;
  Vec gc_sum, gr_sum;
  if (want_grad) {
    gc_text = Matrix(d, d);
    gr_text = Matrix(d, d);
    gc_sum.assign(d, 0.0);
    gr_sum.assign(d, 0.0);
  }
  const double lc = segment_logprob(head_, &policy, quad.chosen, term,
                                    want_grad ? &gc_text : nullptr, want_grad ? &gc_sum : nullptr);
  const double lr = segment_logprob(head_, &policy, quad.rejected, term,
                                    want_grad ? &gr_text : nullptr, want_grad ? &gr_sum : nullptr);
  const double len_c = static_cast<double>(quad.chosen.tokens.size());
  const double margin = cfg_.beta * ((lc - ref_chosen_[q]) - (lr - ref_rejected_[q]));
  out.loss = softplus(-margin) + cfg_.lambda * (-lc / len_c);
  if (!want_grad) return out;

  const double s = sigmoid(-margin);
  const double dl_dc = -cfg_.beta * s - cfg_.lambda / len_c;
  const double dl_dr = cfg_.beta * s;
  out.grad = Gradient(d);
  axpy(dl_dc, gc_text.data(), out.grad.d_text.data());
  axpy(dl_dr, gr_text.data(), out.grad.d_text.data());
  Vec g_img(d, 0.0);
  axpy(dl_dc, gc_sum, g_img);
  axpy(dl_dr, gr_sum, g_img);
  rank1_update(out.grad.d_image, 1.0, g_img, quad.image_bundle);
  return out;
}

std::vector<std::size_t> DpoObjective::all_indices() const {
  std::vector<std::size_t> idx(quads_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

double DpoObjective::loss(const ReCoParams& policy) const { return loss(policy, all_indices()); }

double DpoObjective::loss(const ReCoParams& policy, std::span<const std::size_t> batch) const {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  require(policy.dim() == head_.cols(), ErrorKind::DimensionMismatch, "policy dimension != head d");
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { losses[i] = evaluate(policy, batch[i], false).loss; });
  const double sum = pairwise_reduce(std::move(losses), [](double& a, double b) { a += b; });
  return sum / static_cast<double>(batch.size());
}

Gradient DpoObjective::gradient(const ReCoParams& policy) const {
  return gradient(policy, all_indices());
}

Gradient DpoObjective::gradient(const ReCoParams& policy, std::span<const std::size_t> batch,
                                std::span<double> quad_losses) const {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  require(policy.dim() == head_.cols(), ErrorKind::DimensionMismatch, "policy dimension != head d");
  require(quad_losses.empty() || quad_losses.size() == quads_.size(), ErrorKind::DimensionMismatch,
          "quad_losses must cover every quad");
  std::vector<PerQuad> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) { parts[i] = evaluate(policy, batch[i], true); });
  if (!quad_losses.empty())
    for (std::size_t i = 0; i < batch.size(); ++i) quad_losses[batch[i]] = parts[i].loss;
  PerQuad total = pairwise_reduce(std::move(parts), [](PerQuad& a, const PerQuad& b) {
    a.loss += b.loss;
    a.grad += b.grad;
  });
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& x : total.grad.d_text.data()) x *= inv;
  for (double& x : total.grad.d_image.data()) x *= inv;
  return std::move(total.grad);
}

double dpo_loss(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                std::span<const PreferenceQuad> batch, const DpoConfig& cfg) {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  return DpoObjective(head, reference, batch, cfg).loss(policy);
}

Gradient grad_analytic(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                       std::span<const PreferenceQuad> batch, const DpoConfig& cfg) {
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  return DpoObjective(head, reference, batch, cfg).gradient(policy);
}

Gradient grad_fd(const Matrix& head, const ReCoParams& policy, const ReCoParams& reference,
                 std::span<const PreferenceQuad> batch, const DpoConfig& cfg, double step) {
  require(step > 0.0, ErrorKind::InvalidArgument, "finite-difference step must be > 0");
  require(!batch.empty(), ErrorKind::InvalidArgument, "empty batch");
  const DpoObjective objective(head, reference, batch, cfg);
  const std::size_t d = policy.dim();
  Gradient g(d);
  for (bool text : {true, false}) {
    Matrix& out = text ? g.d_text : g.d_image;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double up = objective.loss(perturbed(policy, text, r, c, step));
        const double down = objective.loss(perturbed(policy, text, r, c, -step));
        out(r, c) = (up - down) / (2.0 * step);
      }
    }
  }
  return g;
}

TrainResult train(const Matrix& head, std::span<const PreferenceQuad> quads, const DpoConfig& cfg,
                  const ReCoParams& init) {
  cfg.validate();
  require(!quads.empty(), ErrorKind::InvalidArgument, "no training quads");
  const DpoObjective objective(head, init, quads, cfg);
  const std::size_t d = init.dim();

  Matrix wt = init.w_text();
  Matrix wi = init.w_image();
  Matrix m_t(d, d), v_t(d, d), m_i(d, d), v_i(d, d);

  TrainResult result{init, {}, 0};
  SplitMix64 rng = SplitMix64::derive(cfg.seed, kShuffleStream);
  std::vector<std::size_t> order(quads.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    // Indexed by quad so the epoch mean does not depend on the shuffle.
    std::vector<double> quad_losses(quads.size(), 0.0);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, n);
      const Gradient g = objective.gradient(ReCoParams(wt, wi), batch, quad_losses);

      ++result.updates;
      if (cfg.optimizer == Optimizer::GradientDescent) {
        axpy(-cfg.lr, g.d_text.data(), wt.data());
        axpy(-cfg.lr, g.d_image.data(), wi.data());
      } else {
        const double k = static_cast<double>(result.updates);
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, k);
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, k);
        auto adam = [&](Matrix& w, Matrix& m, Matrix& v, const Matrix& grad) {
          auto wd = w.data();
          auto md = m.data();
          auto vd = v.data();
          const auto gd = grad.data();
          for (std::size_t i = 0; i < wd.size(); ++i) {
            md[i] = cfg.adam_beta1 * md[i] + (1.0 - cfg.adam_beta1) * gd[i];
            vd[i] = cfg.adam_beta2 * vd[i] + (1.0 - cfg.adam_beta2) * gd[i] * gd[i];
            wd[i] -= cfg.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + cfg.adam_eps);
          }
        };
        adam(wt, m_t, v_t, g.d_text);
        adam(wi, m_i, v_i, g.d_image);
      }
    }
    const double sum = pairwise_reduce(std::move(quad_losses), [](double& a, double b) { a += b; });
    result.epoch_losses.push_back(sum / static_cast<double>(quads.size()));
  }
  result.params = ReCoParams(std::move(wt), std::move(wi));
  return result;
}

TrainResult train(const Matrix& head, const std::filesystem::path& cache_path, const DpoConfig& cfg,
                  const ReCoParams& init) {
  cache::CacheReader reader(cache_path);
  require(reader.header().d == head.cols(), ErrorKind::DimensionMismatch,
          "cache dimension differs from model head");
  std::vector<PreferenceQuad> quads;
  quads.reserve(reader.header().record_count);
  while (auto r = reader.next()) quads.push_back(quad_from_record(*r));
  return train(head, quads, cfg, init);
}

}  // namespace reco::dpo
