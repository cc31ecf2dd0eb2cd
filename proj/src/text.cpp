#include "listreader/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace listreader {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else if (c < 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      cur += static_cast<char>(c);
    }
  }
  flush();
  return out;
}

int Example::passage_tokens() const {
  int n = 0;
  for (const auto& s : sentences) n += static_cast<int>(s.size());
  return n;
}

std::vector<int> Example::sentence_lengths() const {
  std::vector<int> lens;
  lens.reserve(sentences.size());
  for (const auto& s : sentences) lens.push_back(static_cast<int>(s.size()));
  return lens;
}

std::vector<int> Example::answer_sentences() const {
  std::set<int> idx;
  for (const auto& a : answers) idx.insert(a.sentence);
  return {idx.begin(), idx.end()};
}

namespace {

std::vector<int> flat_offsets(const Example& ex) {
  std::vector<int> off(ex.sentences.size() + 1, 0);
  for (std::size_t k = 0; k < ex.sentences.size(); ++k)
    off[k + 1] = off[k] + static_cast<int>(ex.sentences[k].size());
  return off;
}

}  // namespace

void validate_example(const Example& ex, bool strict) {
  if (ex.question.empty()) throw ValidationError("example '" + ex.id + "': empty question");
  if (ex.sentences.empty()) throw ValidationError("example '" + ex.id + "': empty passage");
  for (std::size_t k = 0; k < ex.sentences.size(); ++k)
    if (ex.sentences[k].empty())
      throw ValidationError("example '" + ex.id + "': sentence " + std::to_string(k) +
                            " is empty");
  const int l = static_cast<int>(ex.sentences.size());
  for (const auto& a : ex.answers) {
    if (a.sentence < 0 || a.sentence >= l)
      throw ValidationError("example '" + ex.id + "': answer sentence " +
                            std::to_string(a.sentence) + " outside passage of " +
                            std::to_string(l) + " sentences");
    const int len = static_cast<int>(ex.sentences[a.sentence].size());
    if (a.start < 0 || a.end < a.start || a.end >= len)
      throw ValidationError("example '" + ex.id + "': span [" + std::to_string(a.start) + ", " +
                            std::to_string(a.end) + "] outside sentence " +
                            std::to_string(a.sentence) + " (length " + std::to_string(len) + ")");
  }
  auto sorted = ex.answers;
  std::sort(sorted.begin(), sorted.end(), [](const Span& x, const Span& y) {
    return std::tie(x.sentence, x.start) < std::tie(y.sentence, y.start);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].sentence == sorted[i - 1].sentence && sorted[i].start <= sorted[i - 1].end)
      throw ValidationError("example '" + ex.id + "': overlapping spans in sentence " +
                            std::to_string(sorted[i].sentence));
  }
  if (strict) {
    if (sorted.size() < 2)
      throw ValidationError("example '" + ex.id + "': strict mode requires at least 2 spans");
    const auto off = flat_offsets(ex);
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const int prev_end = off[sorted[i - 1].sentence] + sorted[i - 1].end;
      const int next_start = off[sorted[i].sentence] + sorted[i].start;
      if (next_start <= prev_end + 1)
        throw ValidationError("example '" + ex.id +
                              "': spans are adjacent in the flattened passage");
    }
  }
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

namespace {

const char* kReserved[4] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

Vocab vocab_with_reserved() {
  Vocab v;
  for (int i = 0; i < 4; ++i) {
    v.id_to_token.emplace_back(kReserved[i]);
    v.token_to_id.emplace(kReserved[i], i);
  }
  return v;
}

}  // namespace

Vocab Vocab::build(const std::vector<Example>& examples, int min_count) {
  if (min_count < 1) throw ContractError("Vocab::build: min_count must be >= 1");
  std::unordered_map<std::string, long> counts;
  for (const auto& ex : examples) {
    for (const auto& t : ex.question) ++counts[t];
    for (const auto& s : ex.sentences)
      for (const auto& t : s) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> kept;
  kept.reserve(counts.size());
  for (auto& [tok, c] : counts)
    if (c >= min_count) kept.emplace_back(tok, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v = vocab_with_reserved();
  for (auto& [tok, c] : kept) {
    v.token_to_id.emplace(tok, v.size());
    v.id_to_token.push_back(tok);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v = vocab_with_reserved();
  for (const auto& tok : tokens) {
    if (v.token_to_id.count(tok))
      throw ValidationError("Vocab::from_tokens: duplicate token '" + tok + "'");
    v.token_to_id.emplace(tok, v.size());
    v.id_to_token.push_back(tok);
  }
  return v;
}

BIOLabels spans_to_bio(const Example& ex) {
  validate_example(ex, false);
  BIOLabels out;
  out.tags.assign(ex.passage_tokens(), BIOLabels::kO);
  out.sentence_labels.assign(ex.sentences.size(), 0);
  const auto off = flat_offsets(ex);
  for (const auto& a : ex.answers) {
    out.sentence_labels[a.sentence] = 1;
    const int base = off[a.sentence];
    out.tags[base + a.start] = BIOLabels::kB;
    for (int t = a.start + 1; t <= a.end; ++t) out.tags[base + t] = BIOLabels::kI;
  }
  return out;
}

double TfidfTable::at(int sentence, int col) const {
  if (sentence < 0 || sentence >= sentence_count || col < 0 ||
      col >= static_cast<int>(words.size()))
    throw ContractError("TfidfTable::at: index out of range");
  return values[static_cast<std::size_t>(sentence) * words.size() + col];
}

double TfidfTable::weight(int sentence, const std::string& word) const {
  auto it = word_col.find(word);
  if (it == word_col.end()) return 0.0;
  return at(sentence, it->second);
}

TfidfTable compute_tfidf(const std::vector<std::vector<std::string>>& sentences) {
  if (sentences.empty()) throw ContractError("compute_tfidf: no sentences");
  for (const auto& s : sentences)
    if (s.empty()) throw ContractError("compute_tfidf: empty sentence");
  TfidfTable table;
  table.sentence_count = static_cast<int>(sentences.size());
  for (const auto& s : sentences)
    for (const auto& w : s)
      if (!table.word_col.count(w)) {
        table.word_col.emplace(w, static_cast<int>(table.words.size()));
        table.words.push_back(w);
      }
  const std::size_t wcount = table.words.size();
  std::vector<int> doc_freq(wcount, 0);
  std::vector<std::vector<int>> counts(sentences.size(), std::vector<int>(wcount, 0));
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    for (const auto& w : sentences[k]) ++counts[k][table.word_col.at(w)];
    for (std::size_t c = 0; c < wcount; ++c)
      if (counts[k][c] > 0) ++doc_freq[c];
  }
  const double l = static_cast<double>(sentences.size());
  table.values.assign(sentences.size() * wcount, 0.0);
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    const double len = static_cast<double>(sentences[k].size());
    for (std::size_t c = 0; c < wcount; ++c) {
      if (counts[k][c] == 0) continue;
      const double tf = counts[k][c] / len;
      const double idf = std::log((1.0 + l) / (1.0 + doc_freq[c])) + 1.0;
      table.values[k * wcount + c] = tf * idf;
    }
  }
  return table;
}

// --- JSONL ---------------------------------------------------------------

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

[[noreturn]] void fail_line(int line_no, const std::string& msg) {
  throw ValidationError("line " + std::to_string(line_no) + ": " + msg);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, int line_no,
                const char* what) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      fail_line(line_no, std::string("unknown key '") + it.key() + "' in " + what);
}

}  // namespace

Example example_from_json_line(const std::string& line, int line_no, bool strict) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    fail_line(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) fail_line(line_no, "expected a JSON object");
  check_keys(obj, {"id", "question", "passage_sentences", "answers"}, line_no, "example");
  for (const char* key : {"id", "question", "passage_sentences", "answers"})
    if (!obj.contains(key)) fail_line(line_no, std::string("missing key '") + key + "'");
  if (!obj["id"].is_string()) fail_line(line_no, "'id' must be a string");
  if (!obj["question"].is_string()) fail_line(line_no, "'question' must be a string");
  if (!obj["passage_sentences"].is_array())
    fail_line(line_no, "'passage_sentences' must be an array of strings");
  if (!obj["answers"].is_array()) fail_line(line_no, "'answers' must be an array");

  Example ex;
  ex.id = obj["id"].get<std::string>();
  ex.question = tokenize(obj["question"].get<std::string>());
  for (const auto& s : obj["passage_sentences"]) {
    if (!s.is_string()) fail_line(line_no, "'passage_sentences' must contain strings");
    ex.sentences.push_back(tokenize(s.get<std::string>()));
  }
  for (const auto& a : obj["answers"]) {
    if (!a.is_object()) fail_line(line_no, "'answers' must contain objects");
    check_keys(a, {"sent", "start", "end"}, line_no, "answer");
    for (const char* key : {"sent", "start", "end"})
      if (!a.contains(key) || !a[key].is_number_integer())
        fail_line(line_no, std::string("answer needs integer '") + key + "'");
    ex.answers.push_back(
        Span{a["sent"].get<int>(), a["start"].get<int>(), a["end"].get<int>()});
  }
  std::sort(ex.answers.begin(), ex.answers.end(), [](const Span& x, const Span& y) {
    return std::tie(x.sentence, x.start) < std::tie(y.sentence, y.start);
  });
  try {
    validate_example(ex, strict);
  } catch (const ValidationError& e) {
    fail_line(line_no, e.what());
  }
  return ex;
}

std::vector<Example> load_jsonl(const std::string& path, bool strict) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset: " + path);
  std::vector<Example> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(example_from_json_line(line, line_no, strict));
  }
  return out;
}

std::string example_to_json_line(const Example& ex) {
  json answers = json::array();
  auto sorted = ex.answers;
  std::sort(sorted.begin(), sorted.end(), [](const Span& x, const Span& y) {
    return std::tie(x.sentence, x.start) < std::tie(y.sentence, y.start);
  });
  for (const auto& a : sorted)
    answers.push_back(json{{"end", a.end}, {"sent", a.sentence}, {"start", a.start}});
  json sentences = json::array();
  for (const auto& s : ex.sentences) sentences.push_back(join(s));
  json obj{{"answers", answers},
           {"id", ex.id},
           {"passage_sentences", sentences},
           {"question", join(ex.question)}};
  return obj.dump();
}

void save_jsonl(const std::vector<Example>& examples, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open dataset for writing: " + path);
  for (const auto& ex : examples) os << example_to_json_line(ex) << '\n';
  if (!os) throw IoError("failed writing dataset: " + path);
}

Example truncate_example(const Example& ex, int max_passage_tokens) {
  if (max_passage_tokens < 1) throw ContractError("truncate_example: budget must be positive");
  if (ex.passage_tokens() <= max_passage_tokens) return ex;
  Example out;
  out.id = ex.id;
  out.question = ex.question;
  int budget = max_passage_tokens;
  for (const auto& s : ex.sentences) {
    if (budget <= 0) break;
    const int take = std::min(budget, static_cast<int>(s.size()));
    out.sentences.emplace_back(s.begin(), s.begin() + take);
    budget -= take;
  }
  const int kept = static_cast<int>(out.sentences.size());
  for (const auto& a : ex.answers) {
    if (a.sentence >= kept) continue;
    const int len = static_cast<int>(out.sentences[a.sentence].size());
    if (a.start >= len) continue;
    out.answers.push_back(Span{a.sentence, a.start, std::min(a.end, len - 1)});
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<Example>& examples) {
  CorpusStats s;
  s.examples = static_cast<int>(examples.size());
  if (examples.empty()) return s;
  for (const auto& ex : examples) {
    s.mean_sentences += static_cast<double>(ex.sentences.size());
    s.mean_spans += static_cast<double>(ex.answers.size());
    s.mean_answer_sentences += static_cast<double>(ex.answer_sentences().size());
    s.mean_question_tokens += static_cast<double>(ex.question.size());
    s.mean_passage_tokens += static_cast<double>(ex.passage_tokens());
  }
  const double n = static_cast<double>(s.examples);
  s.mean_sentences /= n;
  s.mean_spans /= n;
  s.mean_answer_sentences /= n;
  s.mean_question_tokens /= n;
  s.mean_passage_tokens /= n;
  return s;
}

}  // namespace listreader
