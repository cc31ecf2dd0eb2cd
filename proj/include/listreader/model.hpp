#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listreader/encoder.hpp"
#include "listreader/extractor.hpp"
#include "listreader/interaction.hpp"
#include "listreader/params.hpp"
#include "listreader/text.hpp"

namespace listreader {

struct ModelConfig {
  int hidden = 64;
  int encoder_layers = 2;
  int heads = 4;
  int max_length = 128;
  int interaction_layers = 3;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Everything a checkpoint needs to rebuild a runnable model.
struct ModelMeta {
  ModelConfig model;
  std::vector<std::string> vocab_tokens;  // non-reserved entries in id order
  std::string ablation = "none";
  double lambda = 2.0;
};

std::string meta_to_json(const ModelMeta& meta);
ModelMeta meta_from_json(const std::string& text);

struct ForwardOptions {
  bool no_align = false;
  bool no_graph = false;
  bool trace = false;
};

ForwardOptions forward_options_for(const std::string& ablation);

// Encoder -> stacked interaction -> co-extraction heads, with every trainable
// tensor registered in one store under a stable name scheme.
class ListReaderModel {
 public:
  ListReaderModel(const ModelConfig& cfg, const Vocab& vocab, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  struct Forward {
    Tensor tag_probs;       // [n x 3]
    Tensor sentence_probs;  // [l_P x 2]
    std::vector<TraceRow> trace;
  };

  // The example must already fit max_length; fit_example handles clipping.
  Forward forward(const Example& ex, const ForwardOptions& opts = {}) const;

  Tensor loss(const Example& ex, double lambda, LossMode mode = LossMode::kJoint,
              const ForwardOptions& opts = {}) const;

  // Clips the passage so the packed sequence fits the configured max length.
  Example fit_example(const Example& ex) const;

  // Runs the sentence head over any [l x d] state, e.g. a recorded trace row.
  std::vector<double> sentence_probabilities(const Tensor& sentence_states) const;

 private:
  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore store_;
  EncoderParams encoder_;
  SentExtParams sentext_;
  std::vector<InteractionLayerParams> interaction_;
  SpanHeadParams span_head_;
  SentenceHeadParams sentence_head_;
};

}  // namespace listreader
