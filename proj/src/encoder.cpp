#include "listreader/encoder.hpp"

#include <cmath>

namespace listreader {

void EncoderConfig::validate() const {
  if (hidden < 1 || layers < 1 || heads < 1 || max_length < 4)
    throw ConfigError("encoder config: hidden/layers/heads must be positive, max_length >= 4");
  if (hidden % heads != 0)
    throw ConfigError("encoder config: hidden " + std::to_string(hidden) +
                      " not divisible by heads " + std::to_string(heads));
}

PackedSequence pack_input(const Example& ex, const Vocab& vocab, int max_length) {
  const int m = static_cast<int>(ex.question.size());
  int n = 0;
  for (const auto& s : ex.sentences) n += static_cast<int>(s.size());
  const int total = m + n + 2;
  if (total > max_length)
    throw ValidationError("example " + ex.id + ": packed length " + std::to_string(total) +
                          " exceeds max_length " + std::to_string(max_length) +
                          "; truncate the passage first");

  PackedSequence packed;
  packed.question_tokens = m;
  packed.passage_tokens = n;
  packed.token_ids.reserve(total);
  packed.token_ids.push_back(Vocab::kCls);
  for (const auto& t : ex.question) packed.token_ids.push_back(vocab.id(t));
  packed.token_ids.push_back(Vocab::kSep);
  for (const auto& s : ex.sentences)
    for (const auto& t : s) packed.token_ids.push_back(vocab.id(t));

  packed.segment_ids.assign(total, 1);
  for (int i = 0; i <= m + 1; ++i) packed.segment_ids[i] = 0;
  packed.position_ids.resize(total);
  for (int i = 0; i < total; ++i) packed.position_ids[i] = i;

  packed.question_sentences = {{1, m}};
  int cursor = m + 2;
  for (const auto& s : ex.sentences) {
    packed.passage_sentences.emplace_back(cursor, static_cast<int>(s.size()));
    cursor += static_cast<int>(s.size());
  }
  return packed;
}

EncoderParams make_encoder_params(ParamStore& store, const std::string& prefix,
                                  const EncoderConfig& cfg, int vocab_size, std::uint64_t seed) {
  cfg.validate();
  if (vocab_size < 4) throw ConfigError("encoder params: vocab smaller than the reserved ids");
  const int d = cfg.hidden;
  std::uint64_t s = seed;
  auto mat = [&](const std::string& name, int r, int c) {
    return store.add(prefix + name, xavier_init({r, c}, s++));
  };
  auto zero_vec = [&](const std::string& name, int len) {
    return store.add(prefix + name, Tensor::zeros({len}));
  };
  auto one_vec = [&](const std::string& name, int len) {
    return store.add(prefix + name, Tensor::full({len}, 1.0));
  };

  EncoderParams p;
  p.heads = cfg.heads;
  p.token_embed = mat("token_embed", vocab_size, d);
  p.position_embed = mat("position_embed", cfg.max_length, d);
  p.segment_embed = mat("segment_embed", 2, d);
  p.embed_ln_gain = one_vec("embed_ln_gain", d);
  p.embed_ln_bias = zero_vec("embed_ln_bias", d);
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string bp = "block" + std::to_string(i) + ".";
    EncoderBlockParams b;
    b.attn_q_w = mat(bp + "attn_q_w", d, d);
    b.attn_q_b = zero_vec(bp + "attn_q_b", d);
    b.attn_k_w = mat(bp + "attn_k_w", d, d);
    b.attn_k_b = zero_vec(bp + "attn_k_b", d);
    b.attn_v_w = mat(bp + "attn_v_w", d, d);
    b.attn_v_b = zero_vec(bp + "attn_v_b", d);
    b.attn_out_w = mat(bp + "attn_out_w", d, d);
    b.attn_out_b = zero_vec(bp + "attn_out_b", d);
    b.ff_in_w = mat(bp + "ff_in_w", d, 2 * d);
    b.ff_in_b = zero_vec(bp + "ff_in_b", 2 * d);
    b.ff_out_w = mat(bp + "ff_out_w", 2 * d, d);
    b.ff_out_b = zero_vec(bp + "ff_out_b", d);
    b.ln_attn_gain = one_vec(bp + "ln_attn_gain", d);
    b.ln_attn_bias = zero_vec(bp + "ln_attn_bias", d);
    b.ln_ff_gain = one_vec(bp + "ln_ff_gain", d);
    b.ln_ff_bias = zero_vec(bp + "ln_ff_bias", d);
    p.blocks.push_back(b);
  }
  return p;
}

SentExtParams make_sentext_params(ParamStore& store, const std::string& prefix, int d,
                                  std::uint64_t seed) {
  if (d < 1) throw ConfigError("sentext params: hidden size must be positive");
  SentExtParams p;
  p.score_in_w = store.add(prefix + "score_in_w", xavier_init({d, d}, seed));
  p.score_in_b = store.add(prefix + "score_in_b", Tensor::zeros({d}));
  p.score_out_w = store.add(prefix + "score_out_w", xavier_init({d, 1}, seed + 1));
  p.score_out_b = store.add(prefix + "score_out_b", Tensor::zeros({1}));
  return p;
}

namespace {

Tensor attention(const Tensor& x, const EncoderBlockParams& b, int heads) {
  const int d = x.cols();
  const int dh = d / heads;
  const Tensor q = add_rowvec(matmul(x, b.attn_q_w), b.attn_q_b);
  const Tensor k = add_rowvec(matmul(x, b.attn_k_w), b.attn_k_b);
  const Tensor v = add_rowvec(matmul(x, b.attn_v_w), b.attn_v_b);
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, dh);
    const Tensor kh = slice_cols(k, h * dh, dh);
    const Tensor vh = slice_cols(v, h * dh, dh);
    const Tensor weights =
        softmax_last_axis(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(double(dh))));
    head_outputs.push_back(matmul(weights, vh));
  }
  return add_rowvec(matmul(concat_cols(head_outputs), b.attn_out_w), b.attn_out_b);
}

}  // namespace

Tensor transformer_encode(const PackedSequence& packed, const EncoderParams& params) {
  const int total = packed.length();
  if (static_cast<int>(packed.token_ids.size()) != total ||
      static_cast<int>(packed.segment_ids.size()) != total ||
      static_cast<int>(packed.position_ids.size()) != total)
    throw ContractError("transformer_encode: packed id arrays disagree with length " +
                        std::to_string(total));
  const int vocab_rows = params.token_embed.rows();
  const int pos_rows = params.position_embed.rows();
  for (int i = 0; i < total; ++i) {
    if (packed.token_ids[i] < 0 || packed.token_ids[i] >= vocab_rows)
      throw ContractError("transformer_encode: token id " + std::to_string(packed.token_ids[i]) +
                          " outside embedding table of " + std::to_string(vocab_rows) + " rows");
    if (packed.position_ids[i] < 0 || packed.position_ids[i] >= pos_rows)
      throw ContractError("transformer_encode: position " + std::to_string(packed.position_ids[i]) +
                          " outside table of " + std::to_string(pos_rows) + " rows");
    if (packed.segment_ids[i] < 0 || packed.segment_ids[i] > 1)
      throw ContractError("transformer_encode: segment id must be 0 or 1");
  }

  Tensor x = add(add(rows_gather(params.token_embed, packed.token_ids),
                     rows_gather(params.position_embed, packed.position_ids)),
                 rows_gather(params.segment_embed, packed.segment_ids));
  x = layer_norm(x, params.embed_ln_gain, params.embed_ln_bias);
  for (const auto& b : params.blocks) {
    x = layer_norm(add(x, attention(x, b, params.heads)), b.ln_attn_gain, b.ln_attn_bias);
    const Tensor ff = add_rowvec(
        matmul(relu(add_rowvec(matmul(x, b.ff_in_w), b.ff_in_b)), b.ff_out_w), b.ff_out_b);
    x = layer_norm(add(x, ff), b.ln_ff_gain, b.ln_ff_bias);
  }
  return x;
}

Tensor sent_ext_alpha(const Tensor& token_states, const SentExtParams& params) {
  if (!token_states.defined() || token_states.rank() != 2 || token_states.rows() < 1)
    throw ContractError("sent_ext: needs a non-empty [tokens x d] matrix");
  const Tensor hidden =
      tanh(add_rowvec(matmul(token_states, params.score_in_w), params.score_in_b));
  const Tensor scores = add_rowvec(matmul(hidden, params.score_out_w), params.score_out_b);
  return softmax_last_axis(transpose(scores));
}

Tensor sent_ext(const Tensor& token_states, const SentExtParams& params) {
  return matmul(sent_ext_alpha(token_states, params), token_states);
}

EncoderOutput encode_example(const PackedSequence& packed, const EncoderParams& params,
                             const SentExtParams& sentext) {
  const Tensor x = transformer_encode(packed, params);
  EncoderOutput out;
  out.h_q = slice_rows(x, 1, packed.question_tokens);
  out.h_p = slice_rows(x, packed.question_tokens + 2, packed.passage_tokens);
  auto pool = [&](const std::vector<std::pair<int, int>>& table) {
    std::vector<Tensor> rows;
    rows.reserve(table.size());
    for (const auto& [start, len] : table) rows.push_back(sent_ext(slice_rows(x, start, len), sentext));
    return vstack(rows);
  };
  out.s_q = pool(packed.question_sentences);
  out.s_p = pool(packed.passage_sentences);
  return out;
}

}  // namespace listreader
