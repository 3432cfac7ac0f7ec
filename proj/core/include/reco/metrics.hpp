#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "reco/toy_vlm.hpp"

namespace reco::metrics {

using ObjectSet = std::set<int>;

struct CaptionEval {
  std::vector<ObjectSet> sentences;  // distinct objects mentioned per sentence
  ObjectSet ground_truth;
};

struct ChairResult {
  double value = 0.0;
  std::size_t hallucinated = 0;
  std::size_t total = 0;   // mentioned objects (chair_i) or sentences (chair_s)
  bool no_mentions = false;  // chair_i only: caption mentioned nothing, value forced to 0
};

// |mentioned \ truth| / |mentioned|, mentioned = union over sentences.
ChairResult chair_i(const CaptionEval& eval);
// sentences containing any object outside the truth / all sentences.
ChairResult chair_s(const CaptionEval& eval);

// Corpus-level CHAIR: counts are pooled over captions before dividing.
ChairResult chair_i(std::span<const CaptionEval> evals);
ChairResult chair_s(std::span<const CaptionEval> evals);

enum class Answer { Yes, No, Unparseable };

Answer parse_answer(std::string_view text);
std::string_view to_string(Answer a);

struct BinaryItem {
  Answer predicted = Answer::Unparseable;
  bool label_yes = false;
  std::optional<std::string> pair_id;
};

struct BinaryEval {
  std::vector<BinaryItem> items;
};

struct PopeScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double answer_rate = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0, unparseable = 0;
  std::vector<std::string> warnings;
};

// Yes is the positive class. Unparseable answers count as wrong for
// accuracy and are left out of the confusion matrix. Throws
// Error(UndefinedScore) when no answer parses.
PopeScores pope_scores(const BinaryEval& eval);

// ½(100 - CHAIR + F1), both inputs on the percent scale.
double amber_score(double chair_percent, double f1_percent);

// Fraction of pairs whose two items are both answered correctly.
double accuracy_plus(const BinaryEval& eval);

// Splits on the period token; each non-empty span is a sentence whose
// mention set is its distinct object ids. Other tokens carry no mentions.
std::vector<ObjectSet> extract_mentions(std::span<const Token> tokens, Token first_object,
                                        std::size_t n_obj, Token period);

// Evaluation report as JSON / a single CSV row (with header).
struct Report {
  std::string run_name;
  std::size_t captions = 0;
  std::optional<ChairResult> chair_i;
  std::optional<ChairResult> chair_s;
  std::optional<PopeScores> pope;
  std::optional<double> accuracy_plus;
  std::optional<double> amber;
  std::vector<std::string> warnings;

  std::string to_json() const;
  std::string csv_header() const;
  std::string csv_row() const;
};

}  // namespace reco::metrics
