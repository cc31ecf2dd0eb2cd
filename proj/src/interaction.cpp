#include "listreader/interaction.hpp"

#include <cmath>

namespace listreader {

SimilarityMatrix similarity(const Tensor& a, const Tensor& b, const Tensor& w,
                            const Tensor& bias) {
  SimilarityMatrix sim;
  sim.u = pair_similarity(a, b, w, bias);
  sim.row_normalized = softmax_last_axis(sim.u);
  sim.column_normalized = transpose(softmax_last_axis(transpose(sim.u)));
  return sim;
}

AlignParams make_align_params(ParamStore& store, const std::string& prefix, int d,
                              std::uint64_t seed) {
  if (d < 1) throw ConfigError("align params: hidden size must be positive");
  AlignParams p;
  p.sim_w = store.add(prefix + "sim_w", xavier_init({4 * d}, seed));
  p.sim_b = store.add(prefix + "sim_b", Tensor::zeros({1}));
  p.fuse_q_w = store.add(prefix + "fuse_q_w", xavier_init({3 * d, d}, seed + 1));
  p.fuse_q_b = store.add(prefix + "fuse_q_b", Tensor::zeros({d}));
  p.fuse_p_w = store.add(prefix + "fuse_p_w", xavier_init({3 * d, d}, seed + 2));
  p.fuse_p_b = store.add(prefix + "fuse_p_b", Tensor::zeros({d}));
  return p;
}

AlignResult align(const Tensor& q_side, const Tensor& p_side, const AlignParams& params) {
  if (!q_side.defined() || !p_side.defined() || q_side.rank() != 2 || p_side.rank() != 2 ||
      q_side.cols() != p_side.cols())
    throw ContractError("align: needs two [rows x d] matrices with a shared feature size");
  AlignResult out;
  out.sim = similarity(q_side, p_side, params.sim_w, params.sim_b);
  // each output row is a convex combination of the opposite side's rows
  out.p_context = matmul(transpose(out.sim.column_normalized), q_side);
  out.q_context = matmul(out.sim.row_normalized, p_side);
  out.q_new = add_rowvec(
      matmul(concat_cols({q_side, out.q_context, mul(q_side, out.q_context)}), params.fuse_q_w),
      params.fuse_q_b);
  out.p_new = add_rowvec(
      matmul(concat_cols({p_side, out.p_context, mul(p_side, out.p_context)}), params.fuse_p_w),
      params.fuse_p_b);
  return out;
}

SparseAdjacency normalize_adjacency(const Tensor& adjacency) {
  if (!adjacency.defined() || adjacency.rank() != 2 || adjacency.rows() != adjacency.cols())
    throw ContractError("normalize_adjacency: needs a square matrix");
  const int n = adjacency.rows();
  std::vector<double> degree(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = adjacency.at(i, j);
      if (w < 0.0)
        throw ContractError("normalize_adjacency: negative edge weight at (" + std::to_string(i) +
                            ", " + std::to_string(j) + ")");
      degree[i] += w;
    }
  }
  SparseAdjacency adj;
  adj.nodes = n;
  for (int i = 0; i < n; ++i) {
    if (degree[i] <= 0.0)
      throw ContractError("normalize_adjacency: node " + std::to_string(i) +
                          " has zero degree; self-loops are required");
    for (int j = 0; j < n; ++j) {
      const double w = adjacency.at(i, j);
      if (w != 0.0)
        adj.entries.push_back({i, j, w / std::sqrt(degree[i] * degree[j])});
    }
  }
  return adj;
}

Tensor dense_from(const SparseAdjacency& adj) {
  Tensor out = Tensor::zeros({adj.nodes, adj.nodes});
  for (const auto& e : adj.entries)
    out.data()[static_cast<std::size_t>(e.row) * adj.nodes + e.col] += e.weight;
  return out;
}

HeteroGraph build_graph(const Example& ex, const TfidfTable& tfidf) {
  const int sentences = static_cast<int>(ex.sentences.size());
  if (tfidf.sentence_count != sentences)
    throw ContractError("build_graph: tf-idf table covers " +
                        std::to_string(tfidf.sentence_count) + " sentences, passage has " +
                        std::to_string(sentences));
  HeteroGraph g;
  g.sentence_nodes = sentences;
  g.word_nodes = ex.passage_tokens();
  const int total = g.sentence_nodes + g.word_nodes;
  g.adjacency = Tensor::zeros({total, total});
  auto& a = g.adjacency.data();
  for (int i = 0; i < total; ++i) a[static_cast<std::size_t>(i) * total + i] = 1.0;
  int word = g.sentence_nodes;
  for (int k = 0; k < sentences; ++k) {
    for (const auto& token : ex.sentences[k]) {
      const double w = tfidf.weight(k, token);
      if (w <= 0.0)
        throw ContractError("build_graph: sentence " + std::to_string(k) +
                            " token has no tf-idf weight");
      a[static_cast<std::size_t>(k) * total + word] = w;
      a[static_cast<std::size_t>(word) * total + k] = w;
      ++word;
    }
  }
  g.normalized = normalize_adjacency(g.adjacency);
  return g;
}

GcnParams make_gcn_params(ParamStore& store, const std::string& prefix, int d,
                          std::uint64_t seed) {
  if (d < 1) throw ConfigError("gcn params: hidden size must be positive");
  GcnParams p;
  p.hop1_w = store.add(prefix + "hop1_w", xavier_init({d, d}, seed));
  p.hop1_b = store.add(prefix + "hop1_b", Tensor::zeros({d}));
  p.hop2_w = store.add(prefix + "hop2_w", xavier_init({d, d}, seed + 1));
  p.hop2_b = store.add(prefix + "hop2_b", Tensor::zeros({d}));
  p.ln_gain = store.add(prefix + "ln_gain", Tensor::full({d}, 1.0));
  p.ln_bias = store.add(prefix + "ln_bias", Tensor::zeros({d}));
  return p;
}

Tensor gcn_block(const Tensor& features, const SparseAdjacency& adj, const GcnParams& params) {
  if (!features.defined() || features.rank() != 2 || features.rows() != adj.nodes)
    throw ContractError("gcn_block: features must be [" + std::to_string(adj.nodes) +
                        " x d] to match the graph");
  const Tensor hop1 = relu(add_rowvec(spmm(adj, matmul(features, params.hop1_w)), params.hop1_b));
  const Tensor hop2 = relu(add_rowvec(spmm(adj, matmul(hop1, params.hop2_w)), params.hop2_b));
  return layer_norm(add(features, hop2), params.ln_gain, params.ln_bias);
}

std::vector<InteractionLayerParams> make_interaction_params(ParamStore& store,
                                                            const std::string& prefix, int d,
                                                            int layers, std::uint64_t seed) {
  if (layers < 1) throw ConfigError("interaction layers must be >= 1");
  std::vector<InteractionLayerParams> out;
  out.reserve(layers);
  std::uint64_t s = seed;
  for (int i = 0; i < layers; ++i) {
    const std::string lp = prefix + "layer" + std::to_string(i) + ".";
    InteractionLayerParams layer;
    layer.token_align = make_align_params(store, lp + "token.", d, s);
    s += 8;
    layer.sentence_align = make_align_params(store, lp + "sent.", d, s);
    s += 8;
    layer.gcn = make_gcn_params(store, lp + "gcn.", d, s);
    s += 8;
    out.push_back(layer);
  }
  return out;
}

namespace {

Tensor detached_copy(const Tensor& t) {
  return Tensor::from(t.shape(), t.data());
}

}  // namespace

InteractionResult interaction_stack(const EncoderOutput& encoded, const Example& ex,
                                    const std::vector<InteractionLayerParams>& layers,
                                    const InteractionOptions& opts) {
  if (layers.empty()) throw ConfigError("interaction stack needs at least one layer");
  InteractionResult out;
  out.state = {encoded.h_q, encoded.h_p, encoded.s_q, encoded.s_p};
  auto& st = out.state;
  if (opts.trace) out.trace.push_back({"E0", detached_copy(st.s_p)});

  HeteroGraph graph;
  if (!opts.no_graph) graph = build_graph(ex, compute_tfidf(ex.sentences));

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string layer_no = std::to_string(i + 1);
    if (!opts.no_align) {
      AlignResult tokens = align(st.h_q, st.h_p, layers[i].token_align);
      st.h_q = tokens.q_new;
      st.h_p = tokens.p_new;
      AlignResult sentences = align(st.s_q, st.s_p, layers[i].sentence_align);
      st.s_q = sentences.q_new;
      st.s_p = sentences.p_new;
      if (opts.trace) out.trace.push_back({"A" + layer_no, detached_copy(st.s_p)});
    }
    if (!opts.no_graph) {
      const Tensor updated = gcn_block(vstack({st.s_p, st.h_p}), graph.normalized, layers[i].gcn);
      st.s_p = slice_rows(updated, 0, graph.sentence_nodes);
      st.h_p = slice_rows(updated, graph.sentence_nodes, graph.word_nodes);
      if (opts.trace) out.trace.push_back({"G" + layer_no, detached_copy(st.s_p)});
    }
  }
  return out;
}

}  // namespace listreader
