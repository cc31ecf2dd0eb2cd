#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "listreader/errors.hpp"

namespace listreader {

// Lowercases, splits on whitespace, and breaks ASCII punctuation into
// standalone tokens. Bytes >= 0x80 are treated as word characters so UTF-8
// stays intact. Idempotent on its own space-joined output.
std::vector<std::string> tokenize(const std::string& text);

// Inclusive token span local to one passage sentence.
struct Span {
  int sentence = 0;
  int start = 0;
  int end = 0;
  bool operator==(const Span&) const = default;
};

struct Example {
  std::string id;
  std::vector<std::string> question;
  std::vector<std::vector<std::string>> sentences;
  std::vector<Span> answers;  // kept sorted by (sentence, start)

  int passage_tokens() const;
  std::vector<int> sentence_lengths() const;
  // distinct answer sentence indices, ascending
  std::vector<int> answer_sentences() const;
};

// Structural checks always run: ids in range, spans inside their sentence,
// no overlap. strict additionally requires >= 2 spans and no two spans
// adjacent in the flattened passage.
void validate_example(const Example& ex, bool strict);

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  std::vector<std::string> id_to_token;  // includes the four reserved entries
  std::unordered_map<std::string, int> token_to_id;

  int id(const std::string& token) const;
  int size() const { return static_cast<int>(id_to_token.size()); }

  // Frequency-then-lexicographic assignment after the reserved ids.
  static Vocab build(const std::vector<Example>& examples, int min_count = 1);
  // Rebuild from the non-reserved token list in id order (checkpoint load).
  static Vocab from_tokens(const std::vector<std::string>& tokens);
};

// BIO tags over the flattened passage plus binary per-sentence labels.
struct BIOLabels {
  static constexpr int kB = 0;
  static constexpr int kI = 1;
  static constexpr int kO = 2;
  std::vector<int> tags;
  std::vector<int> sentence_labels;
};

BIOLabels spans_to_bio(const Example& ex);

// Per-sentence TF-IDF over the words of one passage.
//   tf  = count(word, sentence) / sentence_length
//   idf = ln((1 + sentences) / (1 + doc_freq(word))) + 1
struct TfidfTable {
  std::vector<std::string> words;  // column order: first occurrence in the passage
  std::unordered_map<std::string, int> word_col;
  int sentence_count = 0;
  std::vector<double> values;  // [sentence_count x words.size()]

  double at(int sentence, int col) const;
  double weight(int sentence, const std::string& word) const;  // 0 when absent
};

TfidfTable compute_tfidf(const std::vector<std::vector<std::string>>& sentences);

// JSONL dataset I/O. Raw text fields are tokenized on load; serialization is
// canonical (sorted keys, sorted answers, single line per example) so
// serialize(parse(x)) is a byte-identical fixed point.
std::vector<Example> load_jsonl(const std::string& path, bool strict = false);
void save_jsonl(const std::vector<Example>& examples, const std::string& path);
std::string example_to_json_line(const Example& ex);
Example example_from_json_line(const std::string& line, int line_no, bool strict);

// Drops passage tokens past max_passage_tokens, clipping sentences and
// answers to match. Spans pushed fully outside are removed.
Example truncate_example(const Example& ex, int max_passage_tokens);

struct CorpusStats {
  int examples = 0;
  double mean_sentences = 0.0;
  double mean_spans = 0.0;
  double mean_answer_sentences = 0.0;
  double mean_question_tokens = 0.0;
  double mean_passage_tokens = 0.0;
};

CorpusStats corpus_stats(const std::vector<Example>& examples);

}  // namespace listreader
