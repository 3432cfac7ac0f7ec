#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reco/metrics.hpp"
#include "reco/simulate.hpp"

namespace reco {

// Caption files: JSON lines {"scene":i,"tokens":[...]}, where scene indexes
// the scene file the captions were generated from.
std::string captions_to_jsonl(std::span<const Caption> captions);
std::vector<Caption> parse_captions(const std::string& text);
std::vector<Caption> load_captions(const std::filesystem::path& path);

// Yes/no probe files: JSON lines {"answer":"Yes","label":"yes"|"no",
// "pair":"id"}; "pair" is optional. Answers go through metrics::parse_answer.
metrics::BinaryEval parse_binary_items(const std::string& text);
metrics::BinaryEval load_binary_items(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace reco
