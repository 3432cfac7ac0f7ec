#include "reco/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "reco/error.hpp"

namespace reco::metrics {

namespace {

ObjectSet mentioned_union(const CaptionEval& e) {
  ObjectSet all;
  for (const auto& s : e.sentences) all.insert(s.begin(), s.end());
  return all;
}

bool has_hallucination(const ObjectSet& sentence, const ObjectSet& truth) {
  return std::any_of(sentence.begin(), sentence.end(),
                     [&](int o) { return !truth.contains(o); });
}

std::string lower_trim(std::string_view s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto b = out.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = out.find_last_not_of(" \t\r\n.!,");
  return out.substr(b, e == std::string::npos ? 0 : e - b + 1);
}

}  // namespace

ChairResult chair_i(const CaptionEval& eval) {
  return chair_i(std::span<const CaptionEval>(&eval, 1));
}

ChairResult chair_s(const CaptionEval& eval) {
  return chair_s(std::span<const CaptionEval>(&eval, 1));
}

ChairResult chair_i(std::span<const CaptionEval> evals) {
  ChairResult r;
  for (const auto& e : evals) {
    for (int o : mentioned_union(e)) {
      ++r.total;
      if (!e.ground_truth.contains(o)) ++r.hallucinated;
    }
  }
  if (r.total == 0) {
    r.no_mentions = true;
    return r;
  }
  r.value = static_cast<double>(r.hallucinated) / static_cast<double>(r.total);
  return r;
}

ChairResult chair_s(std::span<const CaptionEval> evals) {
  ChairResult r;
  for (const auto& e : evals) {
    for (const auto& s : e.sentences) {
      ++r.total;
      if (has_hallucination(s, e.ground_truth)) ++r.hallucinated;
    }
  }
  require(r.total > 0, ErrorKind::UndefinedScore, "CHAIR_s needs at least one sentence");
  r.value = static_cast<double>(r.hallucinated) / static_cast<double>(r.total);
  return r;
}

Answer parse_answer(std::string_view text) {
  const std::string t = lower_trim(text);
  if (t == "yes") return Answer::Yes;
  if (t == "no") return Answer::No;
  return Answer::Unparseable;
}

std::string_view to_string(Answer a) {
  switch (a) {
    case Answer::Yes: return "Yes";
    case Answer::No: return "No";
    case Answer::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

PopeScores pope_scores(const BinaryEval& eval) {
  require(!eval.items.empty(), ErrorKind::InvalidArgument, "POPE needs at least one item");
  PopeScores s;
  for (const auto& it : eval.items) {
    if (it.predicted == Answer::Unparseable) {
      ++s.unparseable;
      continue;
    }
    const bool said_yes = it.predicted == Answer::Yes;
    if (said_yes && it.label_yes) ++s.tp;
    else if (said_yes) ++s.fp;
    else if (it.label_yes) ++s.fn;
    else ++s.tn;
  }
  const double total = static_cast<double>(eval.items.size());
  const std::size_t parsed = eval.items.size() - s.unparseable;
  s.answer_rate = static_cast<double>(parsed) / total;
  if (parsed == 0) fail(ErrorKind::UndefinedScore, "no parseable Yes/No answers (answer rate 0)");

  s.accuracy = static_cast<double>(s.tp + s.tn) / total;
  if (s.tp + s.fp > 0) {
    s.precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  } else {
    s.warnings.emplace_back("precision undefined (no Yes predictions); reported as 0");
  }
  if (s.tp + s.fn > 0) {
    s.recall = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  } else {
    s.warnings.emplace_back("recall undefined (no parseable Yes labels); reported as 0");
  }
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  if (s.unparseable > 0)
    s.warnings.emplace_back(std::to_string(s.unparseable) + " unparseable answers counted as wrong");
  return s;
}

double amber_score(double chair_percent, double f1_percent) {
  require(chair_percent >= 0.0 && chair_percent <= 100.0, ErrorKind::OutOfRange,
          "CHAIR must be in [0, 100]");
  require(f1_percent >= 0.0 && f1_percent <= 100.0, ErrorKind::OutOfRange,
          "F1 must be in [0, 100]");
  return 0.5 * (100.0 - chair_percent + f1_percent);
}

double accuracy_plus(const BinaryEval& eval) {
  std::map<std::string, std::vector<bool>> pairs;
  for (const auto& it : eval.items) {
    if (!it.pair_id) fail(ErrorKind::InvalidArgument, "accuracy+ item without pair_id");
    const bool correct = it.predicted != Answer::Unparseable &&
                         (it.predicted == Answer::Yes) == it.label_yes;
    pairs[*it.pair_id].push_back(correct);
  }
  require(!pairs.empty(), ErrorKind::InvalidArgument, "accuracy+ needs at least one pair");
  std::size_t both = 0;
  for (const auto& [id, marks] : pairs) {
    if (marks.size() != 2) fail(ErrorKind::InvalidArgument, "pair '" + id + "' does not have exactly two items");
    if (marks[0] && marks[1]) ++both;
  }
  return static_cast<double>(both) / static_cast<double>(pairs.size());
}

std::vector<ObjectSet> extract_mentions(std::span<const Token> tokens, Token first_object,
                                        std::size_t n_obj, Token period) {
  std::vector<ObjectSet> out;
  ObjectSet current;
  bool any_token = false;
  for (Token w : tokens) {
    if (w == period) {
      if (any_token) out.push_back(std::move(current));
      current.clear();
      any_token = false;
      continue;
    }
    any_token = true;
    if (w >= first_object && w < first_object + n_obj) current.insert(static_cast<int>(w - first_object));
  }
  if (any_token) out.push_back(std::move(current));
  return out;
}

std::string Report::to_json() const {
  nlohmann::json j;
  j["run"] = run_name;
  j["captions"] = captions;
  auto chair_json = [](const ChairResult& c) {
    return nlohmann::json{{"value", c.value}, {"hallucinated", c.hallucinated}, {"total", c.total}};
  };
  if (chair_i) j["chair_i"] = chair_json(*chair_i);
  if (chair_s) j["chair_s"] = chair_json(*chair_s);
  if (pope) {
    j["pope"] = {{"accuracy", pope->accuracy}, {"precision", pope->precision},
                 {"recall", pope->recall},     {"f1", pope->f1},
                 {"answer_rate", pope->answer_rate},
                 {"counts", {{"tp", pope->tp}, {"fp", pope->fp}, {"tn", pope->tn},
                             {"fn", pope->fn}, {"unparseable", pope->unparseable}}}};
  }
  if (accuracy_plus) j["accuracy_plus"] = *accuracy_plus;
  if (amber) j["amber"] = *amber;
  j["warnings"] = warnings;
  return j.dump(2);
}

std::string Report::csv_header() const {
  return "run,captions,chair_i,chair_s,pope_accuracy,pope_f1,answer_rate,accuracy_plus,amber";
}

std::string Report::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  auto opt = [&](bool has, double v) {
    os << ',';
    if (has) os << v;
  };
  os << run_name << ',' << captions;
  opt(chair_i.has_value(), chair_i ? chair_i->value : 0.0);
  opt(chair_s.has_value(), chair_s ? chair_s->value : 0.0);
  opt(pope.has_value(), pope ? pope->accuracy : 0.0);
  opt(pope.has_value(), pope ? pope->f1 : 0.0);
  opt(pope.has_value(), pope ? pope->answer_rate : 0.0);
  opt(accuracy_plus.has_value(), accuracy_plus.value_or(0.0));
  opt(amber.has_value(), amber.value_or(0.0));
  return os.str();
}

}  // namespace reco::metrics
