#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "listreader/params.hpp"
#include "listreader/tensor.hpp"
#include "listreader/text.hpp"

namespace listreader {

struct EncoderConfig {
  int hidden = 64;  // d; must divide evenly by heads
  int layers = 2;
  int heads = 4;
  int max_length = 128;

  void validate() const;
};

// Joint layout [CLS] q_1..q_m [SEP] p_1..p_n. Segment 0 covers the question
// side including [CLS]/[SEP]; segment 1 covers the passage. The boundary
// tables give (start, length) into this layout for every sentence.
struct PackedSequence {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> position_ids;
  int question_tokens = 0;  // m
  int passage_tokens = 0;   // n
  std::vector<std::pair<int, int>> question_sentences;
  std::vector<std::pair<int, int>> passage_sentences;

  int length() const { return question_tokens + passage_tokens + 2; }
};

// Out-of-vocab tokens map to [UNK]. Over-length input is a validation error;
// callers that want clipping truncate the example first.
PackedSequence pack_input(const Example& ex, const Vocab& vocab, int max_length);

struct EncoderBlockParams {
  Tensor attn_q_w, attn_q_b;
  Tensor attn_k_w, attn_k_b;
  Tensor attn_v_w, attn_v_b;
  Tensor attn_out_w, attn_out_b;
  Tensor ff_in_w, ff_in_b;    // d -> 2d
  Tensor ff_out_w, ff_out_b;  // 2d -> d
  Tensor ln_attn_gain, ln_attn_bias;
  Tensor ln_ff_gain, ln_ff_bias;
};

struct EncoderParams {
  Tensor token_embed;     // [vocab x d]
  Tensor position_embed;  // [max_length x d]
  Tensor segment_embed;   // [2 x d]
  Tensor embed_ln_gain, embed_ln_bias;
  std::vector<EncoderBlockParams> blocks;
  int heads = 1;
};

// Self-attentive pooling: score each token, softmax, weighted sum.
struct SentExtParams {
  Tensor score_in_w;   // [d x d]
  Tensor score_in_b;   // [d]
  Tensor score_out_w;  // [d x 1]
  Tensor score_out_b;  // [1]
};

// Registers freshly initialized tensors under `prefix` and returns handles to
// the same storage. Deterministic in (config, seed).
EncoderParams make_encoder_params(ParamStore& store, const std::string& prefix,
                                  const EncoderConfig& cfg, int vocab_size, std::uint64_t seed);
SentExtParams make_sentext_params(ParamStore& store, const std::string& prefix, int d,
                                  std::uint64_t seed);

// Full stack of post-norm self-attention blocks; one d-vector per packed
// position. Ids outside the embedding tables are contract errors.
Tensor transformer_encode(const PackedSequence& packed, const EncoderParams& params);

// Attention weights over the tokens of one sentence, shape [1 x c].
Tensor sent_ext_alpha(const Tensor& token_states, const SentExtParams& params);
// Convex combination of the token vectors, shape [1 x d].
Tensor sent_ext(const Tensor& token_states, const SentExtParams& params);

struct EncoderOutput {
  Tensor h_q;  // [m x d]
  Tensor h_p;  // [n x d]
  Tensor s_q;  // [l_Q x d]
  Tensor s_p;  // [l_P x d]
};

EncoderOutput encode_example(const PackedSequence& packed, const EncoderParams& params,
                             const SentExtParams& sentext);

}  // namespace listreader
