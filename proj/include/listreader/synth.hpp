#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listreader/text.hpp"

namespace listreader {

enum class GenMode { kKeyword, kRelational };

GenMode gen_mode_from_string(const std::string& s);
std::string to_string(GenMode mode);

// Synthetic list-QA corpora. Every sentence follows the frame
//   [filler, slot, content, content, filler]
// and every gold span covers tokens 1..3, so spans never touch sentence
// edges and can never become adjacent when the passage is flattened.
//
// keyword: answer sentences carry the question's topic word in the slot;
// distractors carry some other topic word.
//
// relational: anchor answer sentences carry the topic word, and exactly one
// hidden answer sentence shares no token with the question; its slot word
// also occurs inside an anchor (the bridge). A decoy pair mirrors the same
// two-sentence shape without the question link, so bridge membership cannot
// be read off surface statistics.
struct GenConfig {
  GenMode mode = GenMode::kKeyword;
  int vocab_size = 64;  // content words; topic/filler/question pools are fixed extras
  int min_sentences = 5;
  int max_sentences = 8;
  int min_answers = 2;
  int max_answers = 3;
  int question_len = 4;

  void validate() const;
};

std::vector<Example> generate_synthetic(const GenConfig& config, std::uint64_t seed, int count);

}  // namespace listreader
