#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listreader/params.hpp"
#include "listreader/tensor.hpp"
#include "listreader/text.hpp"

namespace listreader {

struct SpanHeadParams {
  Tensor w;  // [d x 3]
  Tensor b;  // [3]
};

struct SentenceHeadParams {
  Tensor w;  // [d x 2]
  Tensor b;  // [2]
};

SpanHeadParams make_span_head_params(ParamStore& store, const std::string& prefix, int d,
                                     std::uint64_t seed);
SentenceHeadParams make_sentence_head_params(ParamStore& store, const std::string& prefix, int d,
                                             std::uint64_t seed);

// Per-token distribution over {B, I, O}; rows sum to 1.
Tensor span_head(const Tensor& h_p, const SpanHeadParams& params);
// Per-sentence distribution over {not-answer, answer}; rows sum to 1.
Tensor sentence_head(const Tensor& s_p, const SentenceHeadParams& params);
// Column 1 of the sentence distribution as plain probabilities.
std::vector<double> sentence_scores(const Tensor& sentence_probs);

enum class LossMode { kJoint, kSpanOnly, kSentenceOnly };

// Mean token cross-entropy plus lambda times mean sentence cross-entropy.
// kSpanOnly/kSentenceOnly drop the other task entirely (no gradient flows).
Tensor joint_loss(const Tensor& tag_probs, const Tensor& sentence_probs, const BIOLabels& gold,
                  double lambda, LossMode mode = LossMode::kJoint);

// Argmax tags with ties broken B > I > O.
std::vector<int> decode_tags(const Tensor& tag_probs);

// Lenient BIO reading per sentence: B opens a span (closing any open one),
// orphan I opens one too, O closes. Sentence boundaries always split.
std::vector<Span> spans_from_tags(const std::vector<int>& tags,
                                  const std::vector<int>& sentence_lengths);

std::vector<int> predicted_sentences(const std::vector<double>& scores, double threshold = 0.5);

struct AnswerList {
  std::vector<Span> spans;               // ordered, non-overlapping, in-sentence
  std::vector<std::string> span_texts;   // space-joined tokens, parallel to spans
  std::vector<int> answer_sentences;     // thresholded sentence predictions
};

AnswerList decode_bio(const Tensor& tag_probs, const std::vector<double>& scores,
                      const Example& ex, double threshold = 0.5);

// Token-overlap F1 between two span lists over the same passage, computed on
// flattened token positions. Both empty -> 1, exactly one empty -> 0.
double span_f1(const std::vector<Span>& predicted, const std::vector<Span>& gold);

// Set F1 over sentence indices with the same empty-side conventions.
double sentence_f1(const std::vector<int>& predicted, const std::vector<int>& gold);

}  // namespace listreader
