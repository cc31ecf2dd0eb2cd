#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listreader/encoder.hpp"
#include "listreader/params.hpp"
#include "listreader/tensor.hpp"
#include "listreader/text.hpp"

namespace listreader {

// Pairwise scores u[i,j] = w . (a_i, b_j, |a_i - b_j|, a_i * b_j) + bias,
// cached with both normalizations: row_normalized rows sum to 1,
// column_normalized columns sum to 1.
struct SimilarityMatrix {
  Tensor u;
  Tensor row_normalized;
  Tensor column_normalized;
};

SimilarityMatrix similarity(const Tensor& a, const Tensor& b, const Tensor& w, const Tensor& bias);

struct AlignParams {
  Tensor sim_w;   // [4d]
  Tensor sim_b;   // [1]
  Tensor fuse_q_w, fuse_q_b;  // [3d x d], [d]
  Tensor fuse_p_w, fuse_p_b;
};

AlignParams make_align_params(ParamStore& store, const std::string& prefix, int d,
                              std::uint64_t seed);

// Cross-attention in both directions plus a fused projection back to d.
// q_context rows are convex combinations of p rows and vice versa.
struct AlignResult {
  Tensor q_new, p_new;      // fused outputs, same shapes as the inputs
  Tensor q_context;         // [q_rows x d], attends over p
  Tensor p_context;         // [p_rows x d], attends over q
  SimilarityMatrix sim;
};

AlignResult align(const Tensor& q_side, const Tensor& p_side, const AlignParams& params);

// Word/sentence graph over one passage: l_P sentence nodes then n word
// occurrence nodes. Sentence k connects to exactly its own tokens, weighted
// by per-sentence tf-idf; unit self-loops everywhere.
struct HeteroGraph {
  int sentence_nodes = 0;
  int word_nodes = 0;
  Tensor adjacency;            // dense A including self-loops; constant
  SparseAdjacency normalized;  // D^{-1/2} A D^{-1/2}
};

HeteroGraph build_graph(const Example& ex, const TfidfTable& tfidf);

// Symmetric renormalization of a dense non-negative adjacency whose diagonal
// is strictly positive.
SparseAdjacency normalize_adjacency(const Tensor& adjacency);
Tensor dense_from(const SparseAdjacency& adj);

struct GcnParams {
  Tensor hop1_w, hop1_b;  // [d x d], [d]
  Tensor hop2_w, hop2_b;
  Tensor ln_gain, ln_bias;
};

GcnParams make_gcn_params(ParamStore& store, const std::string& prefix, int d, std::uint64_t seed);

// Two propagation hops with ReLU, then residual + layer norm:
//   out = LayerNorm(G + ReLU(A.ReLU(A.G.W1 + b1).W2 + b2))
Tensor gcn_block(const Tensor& features, const SparseAdjacency& adj, const GcnParams& params);

struct InteractionLayerParams {
  AlignParams token_align;
  AlignParams sentence_align;
  GcnParams gcn;
};

std::vector<InteractionLayerParams> make_interaction_params(ParamStore& store,
                                                            const std::string& prefix, int d,
                                                            int layers, std::uint64_t seed);

struct InteractionState {
  Tensor h_q, h_p;  // token states
  Tensor s_q, s_p;  // sentence states
};

struct InteractionOptions {
  bool no_align = false;  // skip both alignment sublayers
  bool no_graph = false;  // skip the graph sublayer
  bool trace = false;     // record sentence states after every sublayer
};

// One sentence-state snapshot per completed sublayer; labels run E0 (encoder
// output), then A1/G1, A2/G2, ... for whichever sublayers are enabled.
struct TraceRow {
  std::string label;
  Tensor s_p;  // detached copy
};

struct InteractionResult {
  InteractionState state;
  std::vector<TraceRow> trace;
};

InteractionResult interaction_stack(const EncoderOutput& encoded, const Example& ex,
                                    const std::vector<InteractionLayerParams>& layers,
                                    const InteractionOptions& opts);

}  // namespace listreader
