#include "listreader/synth.hpp"

#include <algorithm>

#include "listreader/rng.hpp"

namespace listreader {

GenMode gen_mode_from_string(const std::string& s) {
  if (s == "keyword") return GenMode::kKeyword;
  if (s == "relational") return GenMode::kRelational;
  throw ConfigError("unknown generator mode '" + s + "' (expected keyword or relational)");
}

std::string to_string(GenMode mode) {
  return mode == GenMode::kKeyword ? "keyword" : "relational";
}

void GenConfig::validate() const {
  if (vocab_size < 2 * max_sentences + 4)
    throw ConfigError("generator vocab_size " + std::to_string(vocab_size) +
                      " too small; need at least " + std::to_string(2 * max_sentences + 4));
  if (min_sentences < 2 || max_sentences < min_sentences)
    throw ConfigError("bad sentence count range [" + std::to_string(min_sentences) + ", " +
                      std::to_string(max_sentences) + "]");
  if (min_answers < 2)
    throw ConfigError("answers-per-example minimum must be >= 2, got " +
                      std::to_string(min_answers));
  if (max_answers < min_answers)
    throw ConfigError("bad answers range [" + std::to_string(min_answers) + ", " +
                      std::to_string(max_answers) + "]");
  if (min_sentences < min_answers + 1)
    throw ConfigError("passage needs room for a distractor: min_sentences must exceed "
                      "min_answers");
  if (question_len < 3 || question_len > 8)
    throw ConfigError("question_len must be in [3, 8], got " + std::to_string(question_len));
}

namespace {

// Deterministic pseudo-word list; index -> distinct CVCV word.
std::vector<std::string> make_words(int count, int offset) {
  static const char* syl[] = {"ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du",
                              "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu",
                              "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu",
                              "pa", "pe", "pi", "po", "pu", "ra", "re", "ri", "ro", "ru",
                              "sa", "se", "si", "so", "su", "ta", "te", "ti", "to", "tu"};
  constexpr int kSyl = 50;
  std::vector<std::string> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int v = offset + i;
    std::string w = std::string(syl[v % kSyl]) + syl[(v / kSyl) % kSyl];
    if (v >= kSyl * kSyl) w += syl[(v / (kSyl * kSyl)) % kSyl];
    out.push_back(std::move(w));
  }
  return out;
}

struct WordPools {
  std::vector<std::string> fillers;
  std::vector<std::string> topics;
  std::vector<std::string> qverbs;
  std::vector<std::string> content;
};

WordPools make_pools(int content_size) {
  WordPools p;
  p.fillers = make_words(12, 0);
  p.topics = make_words(16, 12);
  p.qverbs = make_words(8, 28);
  p.content = make_words(content_size, 36);
  return p;
}

// Draws example-unique content words so accidental cross-sentence repeats
// cannot fake a bridge.
class ContentDraw {
 public:
  ContentDraw(const std::vector<std::string>& pool, Rng& rng) : pool_(pool) {
    rng.shuffle(pool_);
  }
  const std::string& next() {
    if (used_ >= pool_.size()) throw ContractError("content pool exhausted");
    return pool_[used_++];
  }

 private:
  std::vector<std::string> pool_;
  std::size_t used_ = 0;
};

std::vector<int> sample_distinct(Rng& rng, int count, int upper) {
  std::vector<int> all(upper);
  for (int i = 0; i < upper; ++i) all[i] = i;
  rng.shuffle(all);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

std::string other_topic(const WordPools& pools, const std::string& topic, Rng& rng) {
  for (;;) {
    const std::string& t = rng.pick(pools.topics);
    if (t != topic) return t;
  }
}

Example gen_keyword(const GenConfig& cfg, const WordPools& pools, Rng& rng, int index) {
  Example ex;
  ex.id = "kw-" + std::to_string(index);
  const std::string topic = rng.pick(pools.topics);
  ex.question = {"how", "to"};
  for (int i = 0; i < cfg.question_len - 3; ++i) ex.question.push_back(rng.pick(pools.qverbs));
  ex.question.push_back(topic);

  const int l = rng.uniform_int(cfg.min_sentences, cfg.max_sentences);
  const int t = rng.uniform_int(cfg.min_answers, std::min(cfg.max_answers, l - 1));
  const std::vector<int> answer_idx = sample_distinct(rng, t, l);
  ContentDraw draw(pools.content, rng);

  for (int k = 0; k < l; ++k) {
    const bool is_answer =
        std::binary_search(answer_idx.begin(), answer_idx.end(), k);
    const std::string slot = is_answer ? topic : other_topic(pools, topic, rng);
    ex.sentences.push_back(
        {rng.pick(pools.fillers), slot, draw.next(), draw.next(), rng.pick(pools.fillers)});
    if (is_answer) ex.answers.push_back(Span{k, 1, 3});
  }
  return ex;
}

Example gen_relational(const GenConfig& cfg, const WordPools& pools, Rng& rng, int index) {
  Example ex;
  ex.id = "rel-" + std::to_string(index);
  const std::string topic = rng.pick(pools.topics);
  ex.question = {"how", "to"};
  for (int i = 0; i < cfg.question_len - 3; ++i) ex.question.push_back(rng.pick(pools.qverbs));
  ex.question.push_back(topic);

  const int l = rng.uniform_int(cfg.min_sentences, cfg.max_sentences);
  const int t = rng.uniform_int(cfg.min_answers, std::min(cfg.max_answers, l - 1));
  const std::vector<int> answer_idx = sample_distinct(rng, t, l);
  const int hidden = answer_idx[static_cast<std::size_t>(rng.uniform_int(0, t - 1))];
  // the anchor that carries the bridge word
  int bridge_anchor = -1;
  for (int k : answer_idx)
    if (k != hidden && (bridge_anchor == -1 || rng.uniform() < 0.5)) bridge_anchor = k;

  ContentDraw draw(pools.content, rng);
  const std::string bridge = draw.next();

  // one decoy pair mirroring the anchor/hidden shape, when room allows
  std::vector<int> distractors;
  for (int k = 0; k < l; ++k)
    if (!std::binary_search(answer_idx.begin(), answer_idx.end(), k)) distractors.push_back(k);
  int decoy_carrier = -1, decoy_hidden = -1;
  if (distractors.size() >= 2) {
    std::vector<int> shuffled = distractors;
    rng.shuffle(shuffled);
    decoy_carrier = shuffled[0];
    decoy_hidden = shuffled[1];
  }
  const std::string decoy = draw.next();

  for (int k = 0; k < l; ++k) {
    const bool is_answer = std::binary_search(answer_idx.begin(), answer_idx.end(), k);
    std::string slot, mid;
    if (k == hidden) {
      slot = bridge;
      mid = draw.next();
    } else if (is_answer) {
      slot = topic;
      mid = (k == bridge_anchor) ? bridge : draw.next();
    } else if (k == decoy_hidden) {
      slot = decoy;
      mid = draw.next();
    } else {
      slot = other_topic(pools, topic, rng);
      mid = (k == decoy_carrier) ? decoy : draw.next();
    }
    ex.sentences.push_back(
        {rng.pick(pools.fillers), slot, mid, draw.next(), rng.pick(pools.fillers)});
    if (is_answer) ex.answers.push_back(Span{k, 1, 3});
  }
  return ex;
}

}  // namespace

std::vector<Example> generate_synthetic(const GenConfig& config, std::uint64_t seed, int count) {
  config.validate();
  if (count < 0) throw ConfigError("generator count must be non-negative");
  WordPools pools = make_pools(config.vocab_size);
  Rng rng(seed);
  std::vector<Example> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Example ex = config.mode == GenMode::kKeyword ? gen_keyword(config, pools, rng, i + 1)
                                                  : gen_relational(config, pools, rng, i + 1);
    validate_example(ex, true);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace listreader
