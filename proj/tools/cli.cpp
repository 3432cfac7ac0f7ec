#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "reco/cache.hpp"
#include "reco/diagnostics.hpp"
#include "reco/dpo.hpp"
#include "reco/error.hpp"
#include "reco/experiment.hpp"
#include "reco/ga_check.hpp"
#include "reco/hash.hpp"
#include "reco/metrics.hpp"
#include "reco/parallel.hpp"
#include "reco/reco_params.hpp"
#include "reco/records_io.hpp"
#include "reco/simulate.hpp"

namespace reco::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// Raised by subcommands whose run finished but missed a requested threshold.
struct ThresholdMiss {
  std::string what;
};

std::string file_checksum(const fs::path& path) {
  const std::string text = read_text_file(path);
  return to_hex(fnv1a64(std::as_bytes(std::span(text.data(), text.size()))));
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything needed to replay a run: the exact argument vector, the resolved
// configuration, seeds, and checksums of every file read or written.
class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> args)
      : start_(std::chrono::steady_clock::now()) {
    j_["tool"] = "reco_lab";
    j_["version"] = kVersion;
    j_["subcommand"] = std::move(subcommand);
    j_["args"] = std::move(args);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
    j_["seeds"] = json::object();
    j_["config"] = json::object();
  }

  void input(const fs::path& p) { j_["inputs"][p.string()] = file_checksum(p); }
  void output(const fs::path& p) { j_["outputs"][p.string()] = file_checksum(p); }
  void seed(const std::string& name, std::uint64_t v) { j_["seeds"][name] = v; }
  json& config() { return j_["config"]; }
  json& results() { return j_["results"]; }

  void write(const fs::path& path) {
    j_["threads"] = thread_count();
    j_["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j_["finished_utc"] = utc_now();
    write_file_atomic(path, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

fs::path default_manifest(const fs::path& primary_output) {
  return primary_output.string() + ".manifest.json";
}

DecodeMode parse_mode(const std::string& s) {
  return s == "greedy" ? DecodeMode::Greedy : DecodeMode::Sample;
}

json decode_json(const DecodeOptions& o) {
  return {{"max_len", o.max_len},
          {"mode", o.mode == DecodeMode::Greedy ? "greedy" : "sample"},
          {"temperature", o.temperature},
          {"seed", o.seed}};
}

std::optional<ReCoParams> load_reco(const std::string& path, std::size_t d, Manifest& m) {
  if (path.empty()) return std::nullopt;
  auto p = load_checkpoint(path);
  require(p.dim() == d, ErrorKind::DimensionMismatch, "ReCo checkpoint d differs from model d");
  m.input(path);
  return p;
}

// "a:b" or a single value for both ends.
std::pair<int, int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    std::size_t used = 0;
    if (colon == std::string::npos) {
      const int v = std::stoi(s, &used);
      if (used == s.size()) return {v, v};
    } else {
      const int a = std::stoi(s.substr(0, colon), &used);
      if (used == colon) {
        const std::string rest = s.substr(colon + 1);
        const int b = std::stoi(rest, &used);
        if (used == rest.size()) return {a, b};
      }
    }
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("--dims", "expected N or MIN:MAX, got '" + s + "'");
}

struct ScenesArgs {
  std::string out, manifest;
  std::size_t count = 100, n_obj = 16, max_objects = 4;
  std::uint64_t seed = 0;
};

void cmd_scenes(const ScenesArgs& a, const std::vector<std::string>& args) {
  Manifest m("scenes", args);
  require(a.max_objects <= a.n_obj, ErrorKind::InvalidArgument,
          "--max-objects cannot exceed --n-obj");
  const auto scenes = random_scenes(a.count, a.n_obj, a.seed, a.max_objects);
  write_file_atomic(a.out, scenes_to_jsonl(scenes));
  m.output(a.out);
  m.config() = {{"count", a.count}, {"n_obj", a.n_obj}, {"max_objects", a.max_objects}};
  m.seed("scenes", a.seed);
  m.write(a.manifest.empty() ? default_manifest(a.out) : fs::path(a.manifest));
  std::printf("scenes: %zu scenes -> %s\n", scenes.size(), a.out.c_str());
}

struct SimulateArgs {
  std::string config, scenes, out, captions, reco, manifest;
  std::size_t max_len = 96;
  std::string mode = "sample";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> preference_seed;
};

void cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& args) {
  Manifest m("simulate", args);
  const VlmConfig cfg = load_config(a.config);
  m.input(a.config);
  const ToyVlm model(cfg);
  const auto scenes = load_scenes(a.scenes);
  m.input(a.scenes);
  const auto reco = load_reco(a.reco, cfg.d, m);

  DecodeOptions opts;
  opts.max_len = a.max_len;
  opts.mode = parse_mode(a.mode);
  opts.temperature = a.temperature;
  opts.seed = a.seed;
  const std::uint64_t pref_seed = a.preference_seed.value_or(a.seed);

  const auto captions = caption_scenes(model, scenes, kDefaultPrompt, opts, reco ? &*reco : nullptr);
  const auto records = synthesize_preferences(model, scenes, captions, kDefaultPrompt, pref_seed);

  const fs::path out = a.out;
  const fs::path captions_path =
      a.captions.empty() ? fs::path(out).replace_extension(".captions.jsonl") : fs::path(a.captions);
  const auto checksum = cache::write_cache(records, out, static_cast<std::uint32_t>(cfg.d));
  write_file_atomic(captions_path, captions_to_jsonl(captions));
  m.output(out);
  m.output(captions_path);

  m.config() = {{"model", json::parse(config_to_json(cfg))},
                {"decode", decode_json(opts)},
                {"reco", a.reco.empty() ? json(nullptr) : json(a.reco)},
                {"model_fingerprint", model.config_fingerprint()}};
  m.seed("decode", opts.seed);
  m.seed("preference", pref_seed);
  m.results() = {{"scenes", scenes.size()},
                 {"records", records.size()},
                 {"cache_checksum", to_hex(checksum)}};
  m.write(a.manifest.empty() ? default_manifest(out) : fs::path(a.manifest));
  std::printf("simulate: %zu scenes, %zu preference records -> %s (checksum %s)\n", scenes.size(),
              records.size(), out.c_str(), to_hex(checksum).c_str());
}

struct TrainArgs {
  std::string cache, dpo_config, config, out, init, manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer;
};

void cmd_train(const TrainArgs& a, const std::vector<std::string>& args) {
  Manifest m("train", args);
  const VlmConfig vc = load_config(a.config);
  m.input(a.config);
  const ToyVlm model(vc);

  dpo::DpoConfig cfg;
  if (!a.dpo_config.empty()) {
    cfg = dpo::load_config(a.dpo_config);
    m.input(a.dpo_config);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.optimizer) cfg.optimizer = dpo::optimizer_from_string(*a.optimizer);
  cfg.validate();

  const auto records = cache::read_cache(a.cache);
  m.input(a.cache);
  std::vector<dpo::PreferenceQuad> quads;
  quads.reserve(records.size());
  for (const auto& r : records) {
    if (r.source.config_fingerprint != model.config_fingerprint())
      fail(ErrorKind::Format, "record '" + r.example_id +
                                  "' was produced by a different model (fingerprint " +
                                  r.source.config_fingerprint + ", expected " +
                                  model.config_fingerprint() + ")");
    quads.push_back(dpo::quad_from_record(r));
  }
  require(!quads.empty(), ErrorKind::InvalidArgument, "cache holds no preference records");

  const ReCoParams init = a.init.empty() ? identity_init(vc.d) : *load_reco(a.init, vc.d, m);
  const auto result = dpo::train(model.head(), quads, cfg, init);
  save_checkpoint(result.params, a.out);
  m.output(a.out);

  m.config() = {{"model", json::parse(config_to_json(vc))},
                {"dpo", json::parse(dpo::config_to_json(cfg))},
                {"init", a.init.empty() ? json("identity") : json(a.init)}};
  m.seed("shuffle", cfg.seed);
  m.results() = {{"quads", quads.size()},
                 {"updates", result.updates},
                 {"epoch_losses", result.epoch_losses}};
  m.write(a.manifest.empty() ? default_manifest(a.out) : fs::path(a.manifest));
  std::printf("train: %zu quads, %zu updates, loss", quads.size(), result.updates);
  for (double l : result.epoch_losses) std::printf(" %.6f", l);
  std::printf(" -> %s\n", a.out.c_str());
}

struct EvalArgs {
  std::string captions, scenes, config, pope, pairs, report, csv, manifest;
  std::string name = "run";
  std::optional<double> max_chair_i, max_chair_s;
};

void cmd_eval(const EvalArgs& a, const std::vector<std::string>& args) {
  if (a.captions.empty() && a.pope.empty() && a.pairs.empty())
    throw CLI::ValidationError("eval", "give --captions, --pope or --pairs");
  if (!a.captions.empty() && (a.scenes.empty() || a.config.empty()))
    throw CLI::ValidationError("--captions", "requires --scenes and --config");

  Manifest m("eval", args);
  metrics::Report report;
  report.run_name = a.name;

  if (!a.captions.empty()) {
    const VlmConfig vc = load_config(a.config);
    m.input(a.config);
    const ToyVlm model(vc);
    const auto scenes = load_scenes(a.scenes);
    m.input(a.scenes);
    const auto captions = load_captions(a.captions);
    m.input(a.captions);
    std::vector<metrics::CaptionEval> evals;
    for (const auto& c : captions) {
      if (c.scene_index >= scenes.size())
        fail(ErrorKind::Parse, "caption refers to scene " + std::to_string(c.scene_index) +
                                   " but the scene file has " + std::to_string(scenes.size()));
      evals.push_back(caption_eval(model, scenes[c.scene_index], c.tokens));
    }
    report.captions = captions.size();
    report.chair_i = metrics::chair_i(evals);
    if (report.chair_i->no_mentions) report.warnings.push_back("no object mentions; chair_i set to 0");
    report.chair_s = metrics::chair_s(evals);
  }
  if (!a.pope.empty()) {
    const auto items = load_binary_items(a.pope);
    m.input(a.pope);
    report.pope = metrics::pope_scores(items);
    for (const auto& w : report.pope->warnings) report.warnings.push_back(w);
  }
  if (!a.pairs.empty()) {
    const auto items = load_binary_items(a.pairs);
    m.input(a.pairs);
    report.accuracy_plus = metrics::accuracy_plus(items);
  }
  if (report.chair_i && report.pope)
    report.amber = metrics::amber_score(100.0 * report.chair_i->value, 100.0 * report.pope->f1);

  const std::string text = report.to_json() + "\n";
  if (a.report.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file_atomic(a.report, text);
    m.output(a.report);
  }
  if (!a.csv.empty()) {
    write_file_atomic(a.csv, report.csv_header() + "\n" + report.csv_row() + "\n");
    m.output(a.csv);
  }
  m.config() = {{"name", a.name}};
  m.results() = json::parse(report.to_json());
  if (!a.manifest.empty()) m.write(a.manifest);
  else if (!a.report.empty()) m.write(default_manifest(a.report));

  if (a.max_chair_i && report.chair_i && report.chair_i->value > *a.max_chair_i)
    throw ThresholdMiss{"chair_i " + std::to_string(report.chair_i->value) + " exceeds " +
                        std::to_string(*a.max_chair_i)};
  if (a.max_chair_s && report.chair_s && report.chair_s->value > *a.max_chair_s)
    throw ThresholdMiss{"chair_s " + std::to_string(report.chair_s->value) + " exceeds " +
                        std::to_string(*a.max_chair_s)};
}

struct DiagnoseArgs {
  std::string config, scenes, out, reco, manifest;
  std::size_t t_max = 96;
  std::string mode = "greedy";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::string early = "0:8", late = "64:96";
  std::optional<double> max_late_ratio;
};

void cmd_diagnose(const DiagnoseArgs& a, const std::vector<std::string>& args) {
  Manifest m("diagnose", args);
  const VlmConfig cfg = load_config(a.config);
  m.input(a.config);
  const ToyVlm model(cfg);
  const auto scenes = load_scenes(a.scenes);
  m.input(a.scenes);
  const auto reco = load_reco(a.reco, cfg.d, m);
  const auto [e0, e1] = parse_range(a.early);
  const auto [l0, l1] = parse_range(a.late);
  for (int v : {e0, e1, l0, l1})
    if (v < 0) throw CLI::ValidationError("--early/--late", "window bounds must be >= 0");

  DecodeOptions opts;
  opts.max_len = a.t_max;
  opts.mode = parse_mode(a.mode);
  opts.temperature = a.temperature;
  opts.seed = a.seed;
  const auto curve =
      diag::influence_curve(model, scenes, kDefaultPrompt, a.t_max, reco ? &*reco : nullptr, opts);
  diag::export_curve(curve, a.out);
  m.output(a.out);
  m.output(a.out + ".json");

  const double early = curve.window_mean(static_cast<std::size_t>(e0), static_cast<std::size_t>(e1));
  const double late = curve.window_mean(static_cast<std::size_t>(l0), static_cast<std::size_t>(l1));
  const double ratio = early > 0.0 ? late / early : 0.0;
  m.config() = {{"model", json::parse(config_to_json(cfg))},
                {"decode", decode_json(opts)},
                {"t_max", a.t_max},
                {"reco", a.reco.empty() ? json(nullptr) : json(a.reco)},
                {"early", {e0, e1}},
                {"late", {l0, l1}}};
  m.seed("decode", opts.seed);
  m.results() = {{"early_mean", early}, {"late_mean", late}, {"late_over_early", ratio}};
  m.write(a.manifest.empty() ? default_manifest(a.out) : fs::path(a.manifest));
  std::printf("diagnose: %zu scenes, early [%d,%d) %.6g, late [%d,%d) %.6g, ratio %.6g -> %s\n",
              scenes.size(), e0, e1, early, l0, l1, late, ratio, a.out.c_str());
  if (a.max_late_ratio && ratio > *a.max_late_ratio)
    throw ThresholdMiss{"late/early ratio " + std::to_string(ratio) + " exceeds " +
                        std::to_string(*a.max_late_ratio)};
}

struct GaArgs {
  std::uint64_t trials = 1000;
  std::string dims = "2:6";
  std::uint64_t seed = 7;
  std::string manifest;
};

void cmd_ga_check(const GaArgs& a, const std::vector<std::string>& args) {
  ga::GaCheckOptions o;
  o.trials = a.trials;
  o.seed = a.seed;
  std::tie(o.min_dim, o.max_dim) = parse_range(a.dims);
  if (o.min_dim < 2 || o.max_dim > 8 || o.min_dim > o.max_dim)
    throw CLI::ValidationError("--dims", "need 2 <= MIN <= MAX <= 8");
  if (a.trials == 0) {
    std::printf("ga check: 0 trials, nothing to do\n");
    return;
  }
  const auto report = ga::run_ga_checks(o);
  std::fputs(report.summary().c_str(), stdout);
  if (!a.manifest.empty()) {
    Manifest m("ga check", args);
    m.config() = {{"trials", a.trials}, {"dims", {o.min_dim, o.max_dim}}};
    m.seed("trials", a.seed);
    m.results() = {{"passed", report.passed()}};
    m.write(a.manifest);
  }
  if (!report.passed()) throw ThresholdMiss{"geometric algebra property suite failed"};
}

struct ExperimentArgs {
  std::string config, dpo_config, report;
  bool check = false;
};

void cmd_experiment(const ExperimentArgs& a, const std::vector<std::string>& args) {
  Manifest m("experiment", args);
  experiment::Protocol p;
  if (!a.config.empty()) {
    p.model = load_config(a.config);
    m.input(a.config);
  }
  if (!a.dpo_config.empty()) {
    p.dpo = dpo::load_config(a.dpo_config);
    m.input(a.dpo_config);
  }
  const auto o = experiment::run(p);
  const std::string text = experiment::outcome_to_json(o, p) + "\n";
  if (a.report.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file_atomic(a.report, text);
    m.output(a.report);
    m.config() = json::parse(experiment::protocol_to_json(p));
    m.write(default_manifest(a.report));
  }
  if (!a.check) return;
  std::vector<std::string> misses;
  if (o.base.late_hellinger > 0.25 * o.base.early_hellinger) misses.push_back("fading memory");
  if (o.reco.late_hellinger < 3.0 * o.base.late_hellinger) misses.push_back("influence restoration");
  if (o.reco.chair_i.value > 0.7 * o.base.chair_i.value || o.reco.chair_s.value >= o.base.chair_s.value)
    misses.push_back("hallucination reduction");
  if (!misses.empty()) {
    std::string what = "missed:";
    for (const auto& s : misses) what += " " + s + ";";
    throw ThresholdMiss{what};
  }
}

int cmd_replay(const std::string& manifest_path) {
  const std::string text = read_text_file(manifest_path);
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("args") || !j.contains("outputs"))
    fail(ErrorKind::Parse, "not a reco_lab run manifest: " + manifest_path);
  const auto args = j.at("args").get<std::vector<std::string>>();
  if (!args.empty() && args.front() == "replay")
    fail(ErrorKind::Parse, "refusing to replay a replay manifest");
  const int rc = run(args);
  if (rc != kExitOk) return rc;
  int mismatched = 0;
  for (const auto& [path, sum] : j.at("outputs").items()) {
    const std::string now = file_checksum(path);
    const bool same = now == sum.get<std::string>();
    mismatched += !same;
    std::printf("replay: %s %s (%s)\n", same ? "same" : "DIFFERS", path.c_str(), now.c_str());
  }
  return mismatched == 0 ? kExitOk : kExitThreshold;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"reco_lab: ReCo composition-head experiments on a synthetic vision-language model",
               "reco_lab"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  const auto modes = CLI::IsMember({"greedy", "sample"});

  ScenesArgs sc;
  auto* sn = app.add_subcommand("scenes", "generate random scene JSONL");
  sn->add_option("--out", sc.out, "scene JSONL path")->required();
  sn->add_option("--count", sc.count, "number of scenes")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sn->add_option("--n-obj", sc.n_obj, "object vocabulary size")->capture_default_str()
      ->check(CLI::PositiveNumber);
  sn->add_option("--max-objects", sc.max_objects, "objects per scene are drawn from 1..this")
      ->capture_default_str()->check(CLI::PositiveNumber);
  sn->add_option("--seed", sc.seed, "scene seed")->capture_default_str();
  sn->add_option("--manifest", sc.manifest, "run manifest path (default <out>.manifest.json)");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "caption scenes and write preference records to a cache");
  s->add_option("--config", sim.config, "model config JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--scenes", sim.scenes, "scene JSONL")->required()->check(CLI::ExistingFile);
  s->add_option("--out", sim.out, "output cache path")->required();
  s->add_option("--captions", sim.captions, "caption JSONL output (default: <out> with extension .captions.jsonl)");
  s->add_option("--reco", sim.reco, "ReCo checkpoint to decode with");
  s->add_option("--max-len", sim.max_len, "maximum caption length")->capture_default_str()
      ->check(CLI::PositiveNumber);
  s->add_option("--mode", sim.mode, "decoding mode")->capture_default_str()->check(modes);
  s->add_option("--temperature", sim.temperature, "sampling temperature")->capture_default_str()
      ->check(CLI::PositiveNumber);
  s->add_option("--seed", sim.seed, "decoding seed (scene i uses seed + i)")->capture_default_str();
  s->add_option("--preference-seed", sim.preference_seed,
                "seed for correcting rejected captions (default: --seed)");
  s->add_option("--manifest", sim.manifest, "run manifest path (default <out>.manifest.json)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a ReCo head with DPO on a cache");
  t->add_option("--cache", tr.cache, "preference cache")->required();
  t->add_option("--config", tr.config, "model config JSON (supplies the frozen head)")->required()
      ->check(CLI::ExistingFile);
  t->add_option("--dpo-config", tr.dpo_config, "DPO config JSON (default: beta 0.8, lambda 0.2, "
                                               "lr 5e-3, 10 epochs, batch 128)");
  t->add_option("--out", tr.out, "output checkpoint")->required();
  t->add_option("--init", tr.init, "initial checkpoint (default identity)");
  t->add_option("--seed", tr.seed, "shuffle seed, overrides the DPO config");
  t->add_option("--optimizer", tr.optimizer, "gd or adam, overrides the DPO config")
      ->check(CLI::IsMember({"gd", "adam"}));
  t->add_option("--manifest", tr.manifest, "run manifest path (default <out>.manifest.json)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score captions and yes/no probes");
  e->add_option("--captions", ev.captions, "caption JSONL (CHAIR_i, CHAIR_s)");
  e->add_option("--scenes", ev.scenes, "scene JSONL the captions index into");
  e->add_option("--config", ev.config, "model config JSON (object vocabulary)");
  e->add_option("--pope", ev.pope, "yes/no probe JSONL (POPE scores; AMBER with --captions)");
  e->add_option("--pairs", ev.pairs, "paired probe JSONL (accuracy+)");
  e->add_option("--report", ev.report, "report JSON path (default stdout)");
  e->add_option("--csv", ev.csv, "one-row CSV path");
  e->add_option("--name", ev.name, "run name in the report")->capture_default_str();
  e->add_option("--max-chair-i", ev.max_chair_i, "exit 4 when CHAIR_i exceeds this");
  e->add_option("--max-chair-s", ev.max_chair_s, "exit 4 when CHAIR_s exceeds this");
  e->add_option("--manifest", ev.manifest, "run manifest path (default <report>.manifest.json)");

  DiagnoseArgs dg;
  auto* d = app.add_subcommand("diagnose", "image-influence curve (Hellinger with vs without image)");
  d->add_option("--config", dg.config, "model config JSON")->required()->check(CLI::ExistingFile);
  d->add_option("--scenes", dg.scenes, "scene JSONL")->required()->check(CLI::ExistingFile);
  d->add_option("--out", dg.out, "curve CSV path (sidecar at <out>.json)")->required();
  d->add_option("--reco", dg.reco, "ReCo checkpoint");
  d->add_option("--t-max", dg.t_max, "steps per rollout")->capture_default_str()
      ->check(CLI::PositiveNumber);
  d->add_option("--mode", dg.mode, "how rollout tokens are chosen")->capture_default_str()
      ->check(modes);
  d->add_option("--temperature", dg.temperature, "sampling temperature")->capture_default_str()
      ->check(CLI::PositiveNumber);
  d->add_option("--seed", dg.seed, "sampling seed")->capture_default_str();
  d->add_option("--early", dg.early, "early window START:END")->capture_default_str();
  d->add_option("--late", dg.late, "late window START:END")->capture_default_str();
  d->add_option("--max-late-ratio", dg.max_late_ratio, "exit 4 when late/early exceeds this");
  d->add_option("--manifest", dg.manifest, "run manifest path (default <out>.manifest.json)");

  GaArgs gargs;
  auto* g = app.add_subcommand("ga", "geometric algebra tools");
  g->require_subcommand(1);
  auto* gc = g->add_subcommand("check", "randomized property suite; exit 4 on any failure");
  gc->add_option("--trials", gargs.trials, "random trials (0 is a no-op)")->capture_default_str();
  gc->add_option("--dims", gargs.dims, "dimension N or range MIN:MAX")->capture_default_str();
  gc->add_option("--seed", gargs.seed, "trial seed")->capture_default_str();
  gc->add_option("--manifest", gargs.manifest, "run manifest path");

  ExperimentArgs ex;
  auto* x = app.add_subcommand("experiment", "end-to-end run: simulate, train, compare with and without ReCo");
  x->add_option("--config", ex.config, "model config JSON (default built-in)");
  x->add_option("--dpo-config", ex.dpo_config, "DPO config JSON (default built-in)");
  x->add_option("--report", ex.report, "outcome JSON path (default stdout)");
  x->add_flag("--check", ex.check, "exit 4 unless the fading, restoration and CHAIR targets hold");

  std::string replay_path;
  auto* r = app.add_subcommand("replay", "rerun a manifest and compare output checksums");
  r->add_option("manifest", replay_path, "run manifest JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sn->parsed()) cmd_scenes(sc, args);
    else if (s->parsed()) cmd_simulate(sim, args);
    else if (t->parsed()) cmd_train(tr, args);
    else if (e->parsed()) cmd_eval(ev, args);
    else if (d->parsed()) cmd_diagnose(dg, args);
    else if (gc->parsed()) cmd_ga_check(gargs, args);
    else if (x->parsed()) cmd_experiment(ex, args);
    else if (r->parsed()) return cmd_replay(replay_path);
  } catch (const CLI::Error& err) {
    std::fprintf(stderr, "reco_lab: usage: %s\n", err.what());
    return kExitUsage;
  } catch (const ThresholdMiss& miss) {
    std::fprintf(stderr, "reco_lab: threshold: %s\n", miss.what.c_str());
    return kExitThreshold;
  } catch (const Error& err) {
    std::fprintf(stderr, "reco_lab: error: %s\n", err.what());
    return kExitData;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "reco_lab: error: %s\n", err.what());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace reco::cli
