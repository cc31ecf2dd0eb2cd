#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "listreader/interaction.hpp"
#include "listreader/rng.hpp"
#include "testutil.hpp"

using namespace listreader;

namespace {

Example graph_example() {
  Example ex;
  ex.id = "g";
  ex.question = {"fix", "bolt"};
  ex.sentences = {{"turn", "bolt"}, {"apply", "oil"}};
  ex.answers = {Span{0, 0, 0}, Span{1, 1, 1}};
  return ex;
}

}  // namespace

TEST_CASE("similarity with zero weights is the constant bias") {
  Rng rng(3);
  Tensor a = testutil::random_tensor({3, 4}, rng);
  Tensor b = testutil::random_tensor({5, 4}, rng);
  Tensor w = Tensor::zeros({16});
  Tensor bias = Tensor::from({1}, {0.7});
  SimilarityMatrix sim = similarity(a, b, w, bias);
  CHECK(sim.u.rows() == 3);
  CHECK(sim.u.cols() == 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) CHECK(sim.u.at(i, j) == 0.7);
}

TEST_CASE("identical vectors zero out the difference feature block") {
  Tensor a = Tensor::matrix({{0.3, -0.8}});
  Tensor b = Tensor::matrix({{0.3, -0.8}, {1.0, 2.0}});
  // weight only on the |a - b| block
  Tensor w = Tensor::from({8}, {0, 0, 0, 0, 1.0, 2.0, 0, 0});
  Tensor bias = Tensor::zeros({1});
  SimilarityMatrix sim = similarity(a, b, w, bias);
  CHECK(sim.u.at(0, 0) == 0.0);
  CHECK(sim.u.at(0, 1) == doctest::Approx(std::abs(0.3 - 1.0) + 2.0 * std::abs(-0.8 - 2.0)));
}

TEST_CASE("normalized similarity rows and columns sum to one") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = rng.uniform_int(1, 6), n = rng.uniform_int(1, 6), d = rng.uniform_int(1, 5);
    Tensor a = testutil::random_tensor({m, d}, rng, 2.0);
    Tensor b = testutil::random_tensor({n, d}, rng, 2.0);
    Tensor w = testutil::random_tensor({4 * d}, rng);
    Tensor bias = testutil::random_tensor({1}, rng);
    SimilarityMatrix sim = similarity(a, b, w, bias);
    for (int i = 0; i < m; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += sim.row_normalized.at(i, j);
      CHECK(row == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (int j = 0; j < n; ++j) {
      double col = 0.0;
      for (int i = 0; i < m; ++i) col += sim.column_normalized.at(i, j);
      CHECK(col == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("align with uniform similarity averages the opposite side") {
  Rng rng(19);
  ParamStore store;
  AlignParams params = make_align_params(store, "al.", 4, 5);
  for (auto& v : params.sim_w.data()) v = 0.0;
  Tensor q = testutil::random_tensor({3, 4}, rng);
  Tensor p = testutil::random_tensor({5, 4}, rng);
  AlignResult out = align(q, p, params);
  for (int c = 0; c < 4; ++c) {
    double qmean = 0.0;
    for (int r = 0; r < 3; ++r) qmean += q.at(r, c) / 3.0;
    for (int j = 0; j < 5; ++j) CHECK(out.p_context.at(j, c) == doctest::Approx(qmean));
    double pmean = 0.0;
    for (int r = 0; r < 5; ++r) pmean += p.at(r, c) / 5.0;
    for (int i = 0; i < 3; ++i) CHECK(out.q_context.at(i, c) == doctest::Approx(pmean));
  }
  CHECK(out.q_new.rows() == 3);
  CHECK(out.p_new.rows() == 5);
  CHECK(out.q_new.cols() == 4);
}

TEST_CASE("single-row question pins every context row to it") {
  Rng rng(23);
  ParamStore store;
  AlignParams params = make_align_params(store, "al.", 3, 7);
  Tensor q = testutil::random_tensor({1, 3}, rng);
  Tensor p = testutil::random_tensor({4, 3}, rng);
  AlignResult out = align(q, p, params);
  for (int j = 0; j < 4; ++j)
    for (int c = 0; c < 3; ++c)
      CHECK(out.p_context.at(j, c) == doctest::Approx(q.at(0, c)).epsilon(1e-12));
}

TEST_CASE("context rows stay inside the opposite side's coordinate hull") {
  Rng rng(29);
  ParamStore store;
  AlignParams params = make_align_params(store, "al.", 4, 9);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor q = testutil::random_tensor({1 + trial % 4, 4}, rng, 2.0);
    Tensor p = testutil::random_tensor({1 + (trial * 7) % 5, 4}, rng, 2.0);
    AlignResult out = align(q, p, params);
    for (int j = 0; j < out.p_context.rows(); ++j) {
      for (int c = 0; c < 4; ++c) {
        double lo = q.at(0, c), hi = q.at(0, c);
        for (int r = 1; r < q.rows(); ++r) {
          lo = std::min(lo, q.at(r, c));
          hi = std::max(hi, q.at(r, c));
        }
        CHECK(out.p_context.at(j, c) >= lo - 1e-12);
        CHECK(out.p_context.at(j, c) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("align gradients match finite differences") {
  Rng rng(31);
  ParamStore store;
  AlignParams params = make_align_params(store, "al.", 3, 13);
  Tensor q = testutil::random_tensor({2, 3}, rng, 1.0, true);
  Tensor p = testutil::random_tensor({3, 3}, rng, 1.0, true);
  std::vector<std::pair<std::string, Tensor>> leaves = {{"q", q}, {"p", p}};
  for (const auto& name : store.names()) leaves.emplace_back(name, store.get(name));
  auto rebuild = [&]() {
    AlignResult out = align(q, p, params);
    return mean_all(vstack({out.q_new, out.p_new}));
  };
  auto report = testutil::fd_check(leaves, rebuild);
  INFO("worst at " << report.at);
  CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("graph over 2x2 passage has 6 nodes and 8 off-diagonal nonzeros") {
  Example ex = graph_example();
  HeteroGraph g = build_graph(ex, compute_tfidf(ex.sentences));
  CHECK(g.sentence_nodes == 2);
  CHECK(g.word_nodes == 4);
  const int total = 6;
  CHECK(g.adjacency.rows() == total);
  int off_diag = 0;
  for (int i = 0; i < total; ++i) {
    CHECK(g.adjacency.at(i, i) > 0.0);
    for (int j = 0; j < total; ++j) {
      if (i != j && g.adjacency.at(i, j) != 0.0) {
        ++off_diag;
        CHECK(g.adjacency.at(i, j) == g.adjacency.at(j, i));
        // bipartite: one endpoint is a sentence node, the other a word node
        CHECK(((i < 2) != (j < 2)));
      }
    }
  }
  CHECK(off_diag == 8);
  // every word in these sentences is unique to its sentence:
  // tf = 1/2, idf = ln(3/2)+1
  const double expected = 0.5 * (std::log(1.5) + 1.0);
  CHECK(g.adjacency.at(0, 2) == doctest::Approx(expected));
  CHECK(g.adjacency.at(1, 4) == doctest::Approx(expected));
  CHECK(g.adjacency.at(0, 4) == 0.0);  // word of sentence 1 not linked to sentence 0
}

TEST_CASE("adjacency renormalization matches the hand example") {
  Tensor a = Tensor::matrix({{1.0, 1.0}, {1.0, 1.0}});  // [[0,1],[1,0]] + I
  SparseAdjacency adj = normalize_adjacency(a);
  Tensor dense = dense_from(adj);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(dense.at(i, j) == doctest::Approx(0.5));

  Example ex = graph_example();
  HeteroGraph g = build_graph(ex, compute_tfidf(ex.sentences));
  Tensor norm = dense_from(g.normalized);
  for (int i = 0; i < norm.rows(); ++i)
    for (int j = 0; j < norm.cols(); ++j)
      CHECK(norm.at(i, j) == doctest::Approx(norm.at(j, i)));

  CHECK_THROWS_AS(normalize_adjacency(Tensor::zeros({2, 2})), ContractError);
}

TEST_CASE("zero-weight gcn block is exactly layer norm of its input") {
  Rng rng(37);
  ParamStore store;
  GcnParams params = make_gcn_params(store, "gcn.", 4, 17);
  for (auto& v : params.hop1_w.data()) v = 0.0;
  for (auto& v : params.hop2_w.data()) v = 0.0;
  Example ex = graph_example();
  HeteroGraph g = build_graph(ex, compute_tfidf(ex.sentences));
  Tensor features = testutil::random_tensor({6, 4}, rng);
  Tensor out = gcn_block(features, g.normalized, params);
  Tensor expected = layer_norm(features, params.ln_gain, params.ln_bias);
  CHECK(out.data() == expected.data());
}

TEST_CASE("an isolated node's update ignores the rest of the graph") {
  ParamStore store;
  GcnParams params = make_gcn_params(store, "gcn.", 3, 19);
  // nodes 0 and 1 share an edge; node 2 only has its self-loop
  Tensor a = Tensor::matrix({{1.0, 0.5, 0.0}, {0.5, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  SparseAdjacency adj = normalize_adjacency(a);
  Rng rng(41);
  Tensor f1 = testutil::random_tensor({3, 3}, rng);
  Tensor f2 = Tensor::from({3, 3}, f1.data());
  f2.data()[0] += 1.0;
  f2.data()[4] -= 0.5;
  Tensor out1 = gcn_block(f1, adj, params);
  Tensor out2 = gcn_block(f2, adj, params);
  for (int c = 0; c < 3; ++c) CHECK(out1.at(2, c) == out2.at(2, c));
}

TEST_CASE("stacked gcn blocks pass a finite-difference check") {
  Rng rng(43);
  ParamStore store;
  GcnParams first = make_gcn_params(store, "g1.", 3, 23);
  GcnParams second = make_gcn_params(store, "g2.", 3, 29);
  Example ex = graph_example();
  HeteroGraph g = build_graph(ex, compute_tfidf(ex.sentences));
  Tensor features = testutil::random_tensor({6, 3}, rng, 1.0, true);
  std::vector<std::pair<std::string, Tensor>> leaves = {{"features", features}};
  for (const auto& name : store.names()) leaves.emplace_back(name, store.get(name));
  auto rebuild = [&]() {
    return mean_all(gcn_block(gcn_block(features, g.normalized, first), g.normalized, second));
  };
  auto report = testutil::fd_check(leaves, rebuild);
  INFO("worst at " << report.at);
  CHECK(report.max_rel_err <= 1e-4);
}

namespace {

EncoderOutput random_encoded(Rng& rng, int d, bool requires_grad) {
  EncoderOutput enc;
  enc.h_q = testutil::random_tensor({2, d}, rng, 1.0, requires_grad);
  enc.h_p = testutil::random_tensor({4, d}, rng, 1.0, requires_grad);
  enc.s_q = testutil::random_tensor({1, d}, rng, 1.0, requires_grad);
  enc.s_p = testutil::random_tensor({2, d}, rng, 1.0, requires_grad);
  return enc;
}

}  // namespace

TEST_CASE("interaction stack keeps shapes and differs across depths") {
  Rng rng(47);
  Example ex = graph_example();
  EncoderOutput enc = random_encoded(rng, 5, false);
  ParamStore store;
  auto layers3 = make_interaction_params(store, "inter.", 5, 3, 31);
  InteractionOptions opts;
  InteractionResult full = interaction_stack(enc, ex, layers3, opts);
  CHECK(full.state.h_q.rows() == 2);
  CHECK(full.state.h_p.rows() == 4);
  CHECK(full.state.s_q.rows() == 1);
  CHECK(full.state.s_p.rows() == 2);
  CHECK(full.state.s_p.cols() == 5);
  CHECK(full.trace.empty());

  std::vector<InteractionLayerParams> one = {layers3[0]};
  InteractionResult shallow = interaction_stack(enc, ex, one, opts);
  bool differs = false;
  for (std::size_t i = 0; i < full.state.s_p.size(); ++i)
    differs = differs || full.state.s_p.data()[i] != shallow.state.s_p.data()[i];
  CHECK(differs);

  CHECK_THROWS_AS(interaction_stack(enc, ex, {}, opts), ConfigError);
}

TEST_CASE("tracing records sentence states without changing the result") {
  Rng rng(53);
  Example ex = graph_example();
  EncoderOutput enc = random_encoded(rng, 4, false);
  ParamStore store;
  auto layers = make_interaction_params(store, "inter.", 4, 2, 37);

  InteractionOptions plain;
  InteractionOptions traced;
  traced.trace = true;
  InteractionResult a = interaction_stack(enc, ex, layers, plain);
  InteractionResult b = interaction_stack(enc, ex, layers, traced);
  CHECK(a.state.s_p.data() == b.state.s_p.data());
  CHECK(a.state.h_p.data() == b.state.h_p.data());

  REQUIRE(b.trace.size() == 5);  // E0, then A/G per layer
  CHECK(b.trace[0].label == "E0");
  CHECK(b.trace[1].label == "A1");
  CHECK(b.trace[2].label == "G1");
  CHECK(b.trace[3].label == "A2");
  CHECK(b.trace[4].label == "G2");
  CHECK(b.trace[0].s_p.data() == enc.s_p.data());
  CHECK(b.trace[4].s_p.data() == b.state.s_p.data());
  for (const auto& row : b.trace) CHECK(!row.s_p.requires_grad());
}

TEST_CASE("ablations skip their sublayers") {
  Rng rng(59);
  Example ex = graph_example();
  EncoderOutput enc = random_encoded(rng, 4, false);
  ParamStore store;
  auto layers = make_interaction_params(store, "inter.", 4, 2, 41);

  InteractionOptions no_graph;
  no_graph.no_graph = true;
  no_graph.trace = true;
  InteractionResult ng = interaction_stack(enc, ex, layers, no_graph);
  REQUIRE(ng.trace.size() == 3);
  CHECK(ng.trace[1].label == "A1");
  CHECK(ng.trace[2].label == "A2");

  InteractionOptions no_align;
  no_align.no_align = true;
  no_align.trace = true;
  InteractionResult na = interaction_stack(enc, ex, layers, no_align);
  REQUIRE(na.trace.size() == 3);
  CHECK(na.trace[1].label == "G1");
  CHECK(na.trace[2].label == "G2");
  // question-side states are untouched without alignment
  CHECK(na.state.h_q.data() == enc.h_q.data());
  CHECK(na.state.s_q.data() == enc.s_q.data());

  InteractionOptions both;
  both.no_align = true;
  both.no_graph = true;
  InteractionResult none = interaction_stack(enc, ex, layers, both);
  CHECK(none.state.s_p.data() == enc.s_p.data());
  CHECK(none.state.h_p.data() == enc.h_p.data());
}

TEST_CASE("full interaction stack gradients match finite differences") {
  Rng rng(61);
  Example ex = graph_example();
  EncoderOutput enc = random_encoded(rng, 4, true);
  ParamStore store;
  auto layers = make_interaction_params(store, "inter.", 4, 2, 43);
  std::vector<std::pair<std::string, Tensor>> leaves = {
      {"h_q", enc.h_q}, {"h_p", enc.h_p}, {"s_q", enc.s_q}, {"s_p", enc.s_p}};
  for (const auto& name : store.names()) leaves.emplace_back(name, store.get(name));
  InteractionOptions opts;
  auto rebuild = [&]() {
    InteractionResult out = interaction_stack(enc, ex, layers, opts);
    return mean_all(
        vstack({out.state.h_q, out.state.h_p, out.state.s_q, out.state.s_p}));
  };
  auto report = testutil::fd_check(leaves, rebuild);
  INFO("worst at " << report.at);
  CHECK(report.max_rel_err <= 1e-4);
}
