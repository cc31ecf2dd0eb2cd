#include "listreader/extractor.hpp"

#include <algorithm>
#include <set>

namespace listreader {

SpanHeadParams make_span_head_params(ParamStore& store, const std::string& prefix, int d,
                                     std::uint64_t seed) {
  if (d < 1) throw ConfigError("span head: hidden size must be positive");
  return {store.add(prefix + "w", xavier_init({d, 3}, seed)),
          store.add(prefix + "b", Tensor::zeros({3}))};
}

SentenceHeadParams make_sentence_head_params(ParamStore& store, const std::string& prefix, int d,
                                             std::uint64_t seed) {
  if (d < 1) throw ConfigError("sentence head: hidden size must be positive");
  return {store.add(prefix + "w", xavier_init({d, 2}, seed)),
          store.add(prefix + "b", Tensor::zeros({2}))};
}

Tensor span_head(const Tensor& h_p, const SpanHeadParams& params) {
  if (!h_p.defined() || h_p.rank() != 2)
    throw ContractError("span_head: needs token states [n x d]");
  return softmax_last_axis(add_rowvec(matmul(h_p, params.w), params.b));
}

Tensor sentence_head(const Tensor& s_p, const SentenceHeadParams& params) {
  if (!s_p.defined() || s_p.rank() != 2)
    throw ContractError("sentence_head: needs sentence states [l x d]");
  return softmax_last_axis(add_rowvec(matmul(s_p, params.w), params.b));
}

std::vector<double> sentence_scores(const Tensor& sentence_probs) {
  if (!sentence_probs.defined() || sentence_probs.rank() != 2 || sentence_probs.cols() != 2)
    throw ContractError("sentence_scores: needs an [l x 2] distribution");
  std::vector<double> out(sentence_probs.rows());
  for (int i = 0; i < sentence_probs.rows(); ++i) out[i] = sentence_probs.at(i, 1);
  return out;
}

namespace {

Tensor mean_nll(const Tensor& probs, const std::vector<int>& gold) {
  return scale(mean_all(log_clamped(take_per_row(probs, gold))), -1.0);
}

}  // namespace

Tensor joint_loss(const Tensor& tag_probs, const Tensor& sentence_probs, const BIOLabels& gold,
                  double lambda, LossMode mode) {
  if (mode != LossMode::kSentenceOnly) {
    if (!tag_probs.defined() || tag_probs.rank() != 2 || tag_probs.cols() != 3 ||
        tag_probs.rows() != static_cast<int>(gold.tags.size()))
      throw ContractError("joint_loss: tag distribution must be [" +
                          std::to_string(gold.tags.size()) + " x 3]");
  }
  if (mode != LossMode::kSpanOnly) {
    if (!sentence_probs.defined() || sentence_probs.rank() != 2 || sentence_probs.cols() != 2 ||
        sentence_probs.rows() != static_cast<int>(gold.sentence_labels.size()))
      throw ContractError("joint_loss: sentence distribution must be [" +
                          std::to_string(gold.sentence_labels.size()) + " x 2]");
  }
  switch (mode) {
    case LossMode::kSpanOnly:
      return mean_nll(tag_probs, gold.tags);
    case LossMode::kSentenceOnly:
      return mean_nll(sentence_probs, gold.sentence_labels);
    case LossMode::kJoint:
      break;
  }
  return add(mean_nll(tag_probs, gold.tags),
             scale(mean_nll(sentence_probs, gold.sentence_labels), lambda));
}

std::vector<int> decode_tags(const Tensor& tag_probs) {
  if (!tag_probs.defined() || tag_probs.rank() != 2 || tag_probs.cols() != 3)
    throw ContractError("decode_tags: needs an [n x 3] distribution");
  std::vector<int> tags(tag_probs.rows());
  for (int i = 0; i < tag_probs.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < 3; ++j)
      if (tag_probs.at(i, j) > tag_probs.at(i, best)) best = j;  // ties keep B over I over O
    tags[i] = best;
  }
  return tags;
}

std::vector<Span> spans_from_tags(const std::vector<int>& tags,
                                  const std::vector<int>& sentence_lengths) {
  std::size_t total = 0;
  for (int len : sentence_lengths) {
    if (len < 1) throw ContractError("spans_from_tags: sentence lengths must be positive");
    total += static_cast<std::size_t>(len);
  }
  if (total != tags.size())
    throw ContractError("spans_from_tags: " + std::to_string(tags.size()) + " tags for " +
                        std::to_string(total) + " tokens");
  std::vector<Span> out;
  int flat = 0;
  for (std::size_t k = 0; k < sentence_lengths.size(); ++k) {
    int open = -1;  // local start of the span being built
    for (int i = 0; i < sentence_lengths[k]; ++i, ++flat) {
      const int tag = tags[flat];
      if (tag == BIOLabels::kO) {
        if (open >= 0) out.push_back({static_cast<int>(k), open, i - 1});
        open = -1;
      } else if (tag == BIOLabels::kB) {
        if (open >= 0) out.push_back({static_cast<int>(k), open, i - 1});
        open = i;
      } else if (open < 0) {
        open = i;  // orphan I starts a span
      }
    }
    if (open >= 0) out.push_back({static_cast<int>(k), open, sentence_lengths[k] - 1});
  }
  return out;
}

std::vector<int> predicted_sentences(const std::vector<double>& scores, double threshold) {
  std::vector<int> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= threshold) out.push_back(static_cast<int>(i));
  return out;
}

AnswerList decode_bio(const Tensor& tag_probs, const std::vector<double>& scores,
                      const Example& ex, double threshold) {
  const std::vector<int> lengths = ex.sentence_lengths();
  if (scores.size() != ex.sentences.size())
    throw ContractError("decode_bio: " + std::to_string(scores.size()) + " sentence scores for " +
                        std::to_string(ex.sentences.size()) + " sentences");
  AnswerList out;
  out.spans = spans_from_tags(decode_tags(tag_probs), lengths);
  out.span_texts.reserve(out.spans.size());
  for (const auto& s : out.spans) {
    std::string text;
    for (int i = s.start; i <= s.end; ++i) {
      if (i > s.start) text += ' ';
      text += ex.sentences[s.sentence][i];
    }
    out.span_texts.push_back(text);
  }
  out.answer_sentences = predicted_sentences(scores, threshold);
  return out;
}

namespace {

std::set<long> flat_positions(const std::vector<Span>& spans) {
  // spans from one example never overlap; sentence index shifted far past any
  // realistic sentence length keeps positions distinct across sentences
  std::set<long> out;
  for (const auto& s : spans)
    for (int i = s.start; i <= s.end; ++i)
      out.insert(static_cast<long>(s.sentence) * 1000000L + i);
  return out;
}

double set_f1(std::size_t pred_size, std::size_t gold_size, std::size_t hit) {
  if (pred_size == 0 && gold_size == 0) return 1.0;
  if (pred_size == 0 || gold_size == 0) return 0.0;
  if (hit == 0) return 0.0;
  const double p = static_cast<double>(hit) / static_cast<double>(pred_size);
  const double r = static_cast<double>(hit) / static_cast<double>(gold_size);
  return 2.0 * p * r / (p + r);
}

}  // namespace

double span_f1(const std::vector<Span>& predicted, const std::vector<Span>& gold) {
  const std::set<long> pred = flat_positions(predicted);
  const std::set<long> ref = flat_positions(gold);
  std::size_t hit = 0;
  for (long p : pred) hit += ref.count(p);
  return set_f1(pred.size(), ref.size(), hit);
}

double sentence_f1(const std::vector<int>& predicted, const std::vector<int>& gold) {
  const std::set<int> pred(predicted.begin(), predicted.end());
  const std::set<int> ref(gold.begin(), gold.end());
  std::size_t hit = 0;
  for (int p : pred) hit += ref.count(p);
  return set_f1(pred.size(), ref.size(), hit);
}

}  // namespace listreader
