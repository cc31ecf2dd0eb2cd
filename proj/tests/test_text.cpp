#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "listreader/rng.hpp"
#include "listreader/synth.hpp"
#include "listreader/text.hpp"
#include "testutil.hpp"

using namespace listreader;

TEST_CASE("tokenize lowercases, splits punctuation, and is idempotent") {
  auto t = tokenize("Soak the screw.");
  CHECK(t == std::vector<std::string>{"soak", "the", "screw", "."});

  auto t2 = tokenize("Use WD-40, then rinse!");
  CHECK(t2 == std::vector<std::string>{"use", "wd", "-", "40", ",", "then", "rinse", "!"});

  CHECK(tokenize("   ").empty());

  std::string joined;
  for (std::size_t i = 0; i < t2.size(); ++i) joined += (i ? " " : "") + t2[i];
  CHECK(tokenize(joined) == t2);
}

TEST_CASE("vocab reserves special ids and orders by frequency then token") {
  Example a;
  a.id = "a";
  a.question = {"zeta", "alpha"};
  a.sentences = {{"alpha", "beta", "beta"}};
  Example b;
  b.id = "b";
  b.question = {"beta"};
  b.sentences = {{"gamma", "alpha"}};
  Vocab v = Vocab::build({a, b});
  CHECK(v.id_to_token[0] == "[PAD]");
  CHECK(v.id_to_token[1] == "[UNK]");
  CHECK(v.id_to_token[2] == "[CLS]");
  CHECK(v.id_to_token[3] == "[SEP]");
  // alpha and beta both occur 3 times: lexicographic breaks the tie
  CHECK(v.id("alpha") == 4);
  CHECK(v.id("beta") == 5);
  CHECK(v.id("gamma") == 6);
  CHECK(v.id("zeta") == 7);
  CHECK(v.id("missing") == Vocab::kUnk);

  Vocab filtered = Vocab::build({a, b}, 2);
  CHECK(filtered.id("gamma") == Vocab::kUnk);
  CHECK(filtered.id("alpha") == 4);
}

TEST_CASE("vocab round-trips through its non-reserved token list") {
  Example a;
  a.id = "a";
  a.question = {"x"};
  a.sentences = {{"y", "z"}};
  Vocab v = Vocab::build({a});
  std::vector<std::string> tokens(v.id_to_token.begin() + 4, v.id_to_token.end());
  Vocab w = Vocab::from_tokens(tokens);
  CHECK(w.id_to_token == v.id_to_token);
}

TEST_CASE("tfidf matches the worked two-sentence example") {
  TfidfTable t = compute_tfidf({{"a", "b"}, {"a", "c"}});
  // "a" appears in both sentences: idf = ln(3/3)+1 = 1, tf = 1/2
  CHECK(t.weight(0, "a") == doctest::Approx(0.5));
  CHECK(t.weight(1, "a") == doctest::Approx(0.5));
  // "b" only in sentence 0: 0.5 * (ln(3/2)+1)
  CHECK(t.weight(0, "b") == doctest::Approx(0.5 * (std::log(1.5) + 1.0)));
  CHECK(t.weight(1, "b") == 0.0);
  CHECK(t.weight(0, "nope") == 0.0);
}

TEST_CASE("tfidf is zero exactly where a word is absent") {
  Rng rng(5);
  std::vector<std::string> alphabet = {"w0", "w1", "w2", "w3"};
  for (int trial = 0; trial < 200; ++trial) {
    const int l = rng.uniform_int(1, 5);
    std::vector<std::vector<std::string>> sentences(l);
    for (auto& s : sentences) {
      const int len = rng.uniform_int(1, 6);
      for (int i = 0; i < len; ++i) s.push_back(rng.pick(alphabet));
    }
    TfidfTable t = compute_tfidf(sentences);
    for (int k = 0; k < l; ++k) {
      for (const auto& w : alphabet) {
        const long count = std::count(sentences[k].begin(), sentences[k].end(), w);
        if (count == 0) {
          CHECK(t.weight(k, w) == 0.0);
        } else {
          CHECK(t.weight(k, w) > 0.0);
        }
      }
    }
  }
}

TEST_CASE("spans_to_bio tags B at starts, I inside, O elsewhere") {
  Example ex;
  ex.id = "x";
  ex.question = {"q"};
  ex.sentences = {{"t0", "t1", "t2", "t3"}, {"u0", "u1"}};
  ex.answers = {Span{0, 1, 2}, Span{1, 0, 0}};
  BIOLabels labels = spans_to_bio(ex);
  CHECK(labels.tags == std::vector<int>{BIOLabels::kO, BIOLabels::kB, BIOLabels::kI,
                                        BIOLabels::kO, BIOLabels::kB, BIOLabels::kO});
  CHECK(labels.sentence_labels == std::vector<int>{1, 1});
}

TEST_CASE("validation rejects bad spans") {
  Example ex;
  ex.id = "bad";
  ex.question = {"q"};
  ex.sentences = {{"a", "b", "c"}};

  ex.answers = {Span{0, 1, 5}};
  CHECK_THROWS_AS(validate_example(ex, false), ValidationError);

  ex.answers = {Span{2, 0, 0}};
  CHECK_THROWS_AS(validate_example(ex, false), ValidationError);

  ex.answers = {Span{0, 0, 1}, Span{0, 1, 2}};
  CHECK_THROWS_AS(validate_example(ex, false), ValidationError);

  // strict: needs two non-adjacent spans
  ex.answers = {Span{0, 0, 0}};
  CHECK_NOTHROW(validate_example(ex, false));
  CHECK_THROWS_AS(validate_example(ex, true), ValidationError);
  ex.answers = {Span{0, 0, 0}, Span{0, 1, 2}};
  CHECK_THROWS_AS(validate_example(ex, true), ValidationError);
  ex.answers = {Span{0, 0, 0}, Span{0, 2, 2}};
  CHECK_NOTHROW(validate_example(ex, true));
}

TEST_CASE("jsonl load reports the offending line") {
  testutil::TempDir dir("jsonl");
  {
    std::ofstream os(dir.file("bad.jsonl"));
    os << R"({"id":"1","question":"q","passage_sentences":["a b"],"answers":[]})" << "\n";
    os << R"({"id":"2","question":"q","passage_sentences":["a b"],"answers":[{"sent":0,"start":0,"end":9}]})"
       << "\n";
  }
  try {
    load_jsonl(dir.file("bad.jsonl"));
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  {
    std::ofstream os(dir.file("junk.jsonl"));
    os << "not json\n";
  }
  CHECK_THROWS_AS(load_jsonl(dir.file("junk.jsonl")), ValidationError);

  {
    std::ofstream os(dir.file("extra.jsonl"));
    os << R"({"id":"1","question":"q","passage_sentences":["a"],"answers":[],"bogus":1})" << "\n";
  }
  CHECK_THROWS_AS(load_jsonl(dir.file("extra.jsonl")), ValidationError);
}

TEST_CASE("serialization is a canonical fixed point") {
  testutil::TempDir dir("roundtrip");
  const std::string path = dir.file("data.jsonl");
  {
    std::ofstream os(path);
    os << R"({"question":"Fix   the Bolt?","id":"e1","passage_sentences":["Turn IT loose.","apply oil"],"answers":[{"end":1,"sent":0,"start":0},{"sent":1,"start":0,"end":1}]})"
       << "\n";
  }
  auto parsed = load_jsonl(path);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].question == std::vector<std::string>{"fix", "the", "bolt", "?"});
  CHECK(parsed[0].sentences[0] == std::vector<std::string>{"turn", "it", "loose", "."});

  const std::string canon = dir.file("canon.jsonl");
  save_jsonl(parsed, canon);
  auto reparsed = load_jsonl(canon);
  const std::string canon2 = dir.file("canon2.jsonl");
  save_jsonl(reparsed, canon2);

  std::ifstream a(canon), b(canon2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());
}

TEST_CASE("truncation clips sentences and drops out-of-range answers") {
  Example ex;
  ex.id = "t";
  ex.question = {"q"};
  ex.sentences = {{"a", "b", "c"}, {"d", "e", "f"}, {"g", "h"}};
  ex.answers = {Span{0, 1, 2}, Span{1, 1, 2}, Span{2, 0, 1}};
  Example cut = truncate_example(ex, 5);
  CHECK(cut.sentences.size() == 2);
  CHECK(cut.sentences[1].size() == 2);
  CHECK(cut.passage_tokens() == 5);
  REQUIRE(cut.answers.size() == 2);
  CHECK(cut.answers[0] == Span{0, 1, 2});
  CHECK(cut.answers[1] == Span{1, 1, 1});  // clipped end
  CHECK(truncate_example(ex, 100).passage_tokens() == 8);
}

TEST_CASE("corpus stats report both span and answer-sentence means") {
  Example a;
  a.id = "a";
  a.question = {"q", "w"};
  a.sentences = {{"x", "y", "z"}, {"u", "v"}};
  a.answers = {Span{0, 0, 0}, Span{0, 2, 2}, Span{1, 0, 0}};
  Example b;
  b.id = "b";
  b.question = {"q"};
  b.sentences = {{"x"}};
  b.answers = {Span{0, 0, 0}};
  CorpusStats s = corpus_stats({a, b});
  CHECK(s.examples == 2);
  CHECK(s.mean_spans == doctest::Approx(2.0));
  CHECK(s.mean_answer_sentences == doctest::Approx(1.5));
  CHECK(s.mean_sentences == doctest::Approx(1.5));
}

TEST_CASE("generator is deterministic and produces valid strict examples") {
  GenConfig cfg;
  cfg.mode = GenMode::kKeyword;
  auto a = generate_synthetic(cfg, 99, 25);
  auto b = generate_synthetic(cfg, 99, 25);
  REQUIRE(a.size() == 25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(example_to_json_line(a[i]) == example_to_json_line(b[i]));
    CHECK_NOTHROW(validate_example(a[i], true));
    CHECK(a[i].answers.size() >= 2);
  }
  auto c = generate_synthetic(cfg, 100, 25);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_diff = any_diff || example_to_json_line(a[i]) != example_to_json_line(c[i]);
  CHECK(any_diff);
}

TEST_CASE("keyword mode: answer sentences share a token with the question, spans sit inside") {
  GenConfig cfg;
  cfg.mode = GenMode::kKeyword;
  auto examples = generate_synthetic(cfg, 7, 50);
  for (const auto& ex : examples) {
    std::set<std::string> qtokens(ex.question.begin(), ex.question.end());
    const std::vector<int> answer_rows = ex.answer_sentences();
    std::set<int> gold(answer_rows.begin(), answer_rows.end());
    for (std::size_t k = 0; k < ex.sentences.size(); ++k) {
      bool overlap = false;
      for (const auto& tok : ex.sentences[k]) overlap = overlap || qtokens.count(tok);
      CHECK(overlap == (gold.count(static_cast<int>(k)) != 0));
    }
    for (const auto& a : ex.answers) {
      CHECK(a.start >= 1);
      CHECK(a.end <= static_cast<int>(ex.sentences[a.sentence].size()) - 2);
    }
  }
}

TEST_CASE("relational mode: a bridge answer sentence has zero question overlap") {
  GenConfig cfg;
  cfg.mode = GenMode::kRelational;
  auto examples = generate_synthetic(cfg, 11, 50);
  for (const auto& ex : examples) {
    std::set<std::string> qtokens(ex.question.begin(), ex.question.end());
    int hidden_count = 0;
    for (int k : ex.answer_sentences()) {
      bool overlap = false;
      for (const auto& tok : ex.sentences[k]) overlap = overlap || qtokens.count(tok);
      if (!overlap) {
        ++hidden_count;
        // the hidden sentence's slot word must appear in some other answer sentence
        const std::string& bridge = ex.sentences[k][1];
        bool linked = false;
        for (int other : ex.answer_sentences()) {
          if (other == k) continue;
          for (const auto& tok : ex.sentences[other]) linked = linked || tok == bridge;
        }
        CHECK(linked);
      }
    }
    CHECK(hidden_count >= 1);
  }
}

TEST_CASE("generator rejects infeasible configs") {
  GenConfig cfg;
  cfg.min_answers = 1;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1, 1), ConfigError);
  GenConfig cfg2;
  cfg2.min_sentences = 2;
  cfg2.max_sentences = 2;
  cfg2.min_answers = 2;
  CHECK_THROWS_AS(generate_synthetic(cfg2, 1, 1), ConfigError);
  GenConfig cfg3;
  cfg3.vocab_size = 4;
  CHECK_THROWS_AS(generate_synthetic(cfg3, 1, 1), ConfigError);
}
