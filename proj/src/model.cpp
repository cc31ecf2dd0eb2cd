#include "listreader/model.hpp"

#include <json.hpp>

namespace listreader {

using nlohmann::json;

void ModelConfig::validate() const {
  if (hidden < 1 || encoder_layers < 1 || heads < 1 || max_length < 4 || interaction_layers < 1)
    throw ConfigError("model config: all dimensions must be positive (max_length >= 4)");
  if (hidden % heads != 0)
    throw ConfigError("model config: hidden " + std::to_string(hidden) +
                      " not divisible by heads " + std::to_string(heads));
}

std::string meta_to_json(const ModelMeta& meta) {
  json j;
  j["model"] = {{"hidden", meta.model.hidden},
                {"encoder_layers", meta.model.encoder_layers},
                {"heads", meta.model.heads},
                {"max_length", meta.model.max_length},
                {"interaction_layers", meta.model.interaction_layers}};
  j["vocab"] = meta.vocab_tokens;
  j["ablation"] = meta.ablation;
  j["lambda"] = meta.lambda;
  return j.dump();
}

ModelMeta meta_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint meta is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("model") || !j.contains("vocab") || !j.contains("ablation"))
    throw ValidationError("checkpoint meta missing model/vocab/ablation");
  ModelMeta meta;
  const json& m = j["model"];
  meta.model.hidden = m.at("hidden").get<int>();
  meta.model.encoder_layers = m.at("encoder_layers").get<int>();
  meta.model.heads = m.at("heads").get<int>();
  meta.model.max_length = m.at("max_length").get<int>();
  meta.model.interaction_layers = m.at("interaction_layers").get<int>();
  meta.vocab_tokens = j.at("vocab").get<std::vector<std::string>>();
  meta.ablation = j.at("ablation").get<std::string>();
  if (j.contains("lambda")) meta.lambda = j.at("lambda").get<double>();
  meta.model.validate();
  return meta;
}

ForwardOptions forward_options_for(const std::string& ablation) {
  ForwardOptions opts;
  if (ablation == "none" || ablation == "separate_train") return opts;
  if (ablation == "no_graph") {
    opts.no_graph = true;
    return opts;
  }
  if (ablation == "no_align") {
    opts.no_align = true;
    return opts;
  }
  throw ConfigError("unknown ablation '" + ablation +
                    "'; expected none, no_graph, no_align, or separate_train");
}

ListReaderModel::ListReaderModel(const ModelConfig& cfg, const Vocab& vocab, std::uint64_t seed)
    : cfg_(cfg), vocab_(vocab) {
  cfg_.validate();
  EncoderConfig enc_cfg;
  enc_cfg.hidden = cfg_.hidden;
  enc_cfg.layers = cfg_.encoder_layers;
  enc_cfg.heads = cfg_.heads;
  enc_cfg.max_length = cfg_.max_length;
  encoder_ = make_encoder_params(store_, "enc.", enc_cfg, vocab_.size(), seed);
  sentext_ = make_sentext_params(store_, "sentext.", cfg_.hidden, seed + 1000);
  interaction_ =
      make_interaction_params(store_, "inter.", cfg_.hidden, cfg_.interaction_layers, seed + 2000);
  span_head_ = make_span_head_params(store_, "span_head.", cfg_.hidden, seed + 9000);
  sentence_head_ = make_sentence_head_params(store_, "sentence_head.", cfg_.hidden, seed + 9100);
}

ListReaderModel::Forward ListReaderModel::forward(const Example& ex,
                                                  const ForwardOptions& opts) const {
  const PackedSequence packed = pack_input(ex, vocab_, cfg_.max_length);
  const EncoderOutput encoded = encode_example(packed, encoder_, sentext_);
  InteractionOptions iopts;
  iopts.no_align = opts.no_align;
  iopts.no_graph = opts.no_graph;
  iopts.trace = opts.trace;
  InteractionResult inter = interaction_stack(encoded, ex, interaction_, iopts);
  Forward out;
  out.tag_probs = span_head(inter.state.h_p, span_head_);
  out.sentence_probs = sentence_head(inter.state.s_p, sentence_head_);
  out.trace = std::move(inter.trace);
  return out;
}

Tensor ListReaderModel::loss(const Example& ex, double lambda, LossMode mode,
                             const ForwardOptions& opts) const {
  const Forward fwd = forward(ex, opts);
  return joint_loss(fwd.tag_probs, fwd.sentence_probs, spans_to_bio(ex), lambda, mode);
}

std::vector<double> ListReaderModel::sentence_probabilities(const Tensor& sentence_states) const {
  NoGradGuard no_grad;
  return sentence_scores(sentence_head(sentence_states, sentence_head_));
}

Example ListReaderModel::fit_example(const Example& ex) const {
  const int budget = cfg_.max_length - static_cast<int>(ex.question.size()) - 2;
  if (budget < 1)
    throw ValidationError("example " + ex.id + ": question alone exceeds max_length " +
                          std::to_string(cfg_.max_length));
  if (ex.passage_tokens() <= budget) return ex;
  return truncate_example(ex, budget);
}

}  // namespace listreader
