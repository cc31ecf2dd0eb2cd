#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "listreader/params.hpp"
#include "listreader/tensor.hpp"
#include "testutil.hpp"

using namespace listreader;
using testutil::fd_check;
using testutil::random_tensor;

TEST_CASE("tensor construction validates shapes") {
  CHECK_THROWS_AS(Tensor::zeros({0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({2, -1}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), DimensionError);
  Tensor t = Tensor::zeros({3, 4});
  CHECK(t.rows() == 3);
  CHECK(t.cols() == 4);
  CHECK(t.size() == 12);
}

TEST_CASE("matmul matches hand example") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  Tensor b = Tensor::matrix({{1}, {1}});
  Tensor c = matmul(a, b);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 1);
  CHECK(c.at(0, 0) == doctest::Approx(3.0));
  CHECK(c.at(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul identity is a no-op") {
  Rng rng(7);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor eye = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) eye.data()[i * 4 + i] = 1.0;
  Tensor c = matmul(a, eye);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(c.data()[i] == doctest::Approx(a.data()[i]));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  try {
    matmul(a, b);
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2 x 3]") != std::string::npos);
    CHECK(msg.find("[4 x 2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  Tensor a = random_tensor({3, 4}, rng, 1.0, true);
  Tensor b = random_tensor({4, 2}, rng, 1.0, true);
  auto report = fd_check({{"a", a}, {"b", b}}, [&]() { return sum_all(matmul(a, b)); });
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("softmax handles uniform and extreme logits") {
  Tensor u = softmax_last_axis(Tensor::row({0, 0, 0}));
  for (int i = 0; i < 3; ++i) CHECK(u.at(i) == doctest::Approx(1.0 / 3.0));

  Tensor e = softmax_last_axis(Tensor::row({1000, 0}));
  CHECK(std::isfinite(e.at(0)));
  CHECK(e.at(0) == doctest::Approx(1.0));
  CHECK(e.at(1) == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  Tensor x = random_tensor({6, 5}, rng, 4.0);
  Tensor y = softmax_last_axis(x);
  for (int i = 0; i < 6; ++i) {
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += y.at(i, j);
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("softmax gradient matches finite differences") {
  Rng rng(5);
  Tensor x = random_tensor({1, 5}, rng, 2.0, true);
  Tensor mixer = random_tensor({5, 1}, rng);
  auto report =
      fd_check({{"x", x}}, [&]() { return sum_all(matmul(softmax_last_axis(x), mixer)); });
  CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("layer_norm normalizes constant and two-point rows") {
  Tensor g = Tensor::full({4}, 1.0);
  Tensor b = Tensor::zeros({4});
  Tensor y = layer_norm(Tensor::matrix({{5, 5, 5, 5}}), g, b);
  for (int j = 0; j < 4; ++j) CHECK(y.at(0, j) == doctest::Approx(0.0));

  Tensor g2 = Tensor::full({2}, 1.0);
  Tensor b2 = Tensor::zeros({2});
  Tensor y2 = layer_norm(Tensor::matrix({{1, -1}}), g2, b2);
  CHECK(y2.at(0, 0) == doctest::Approx(0.999995).epsilon(1e-6));
  CHECK(y2.at(0, 1) == doctest::Approx(-0.999995).epsilon(1e-6));
}

TEST_CASE("layer_norm gradient matches finite differences") {
  Rng rng(13);
  Tensor x = random_tensor({2, 6}, rng, 1.0, true);
  Tensor g = random_tensor({6}, rng, 1.0, true);
  Tensor b = random_tensor({6}, rng, 1.0, true);
  Tensor mixer = random_tensor({6, 1}, rng);
  auto report = fd_check({{"x", x}, {"gamma", g}, {"beta", b}},
                         [&]() { return sum_all(matmul(layer_norm(x, g, b), mixer)); });
  CHECK(report.max_rel_err <= 1e-5);
}

TEST_CASE("backward computes 2x on sum of squares and accumulates across uses") {
  Tensor x = Tensor::row({1, 2, 3}, true);
  x.zero_grad();
  Tensor loss = sum_all(mul(x, x));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));

  // y used twice: d(sum(y + y))/dy = 2 everywhere
  Tensor y = Tensor::row({1, 1}, true);
  y.zero_grad();
  sum_all(add(y, y)).backward();
  CHECK(y.grad()[0] == doctest::Approx(2.0));
  CHECK(y.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("backward leaves unrelated parameters with zero gradient") {
  Tensor x = Tensor::row({2}, true);
  Tensor unused = Tensor::row({5}, true);
  x.zero_grad();
  unused.zero_grad();
  sum_all(mul(x, x)).backward();
  CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::row({1, 2}, true);
  CHECK_THROWS_AS(mul(x, x).backward(), ContractError);
}

TEST_CASE("elementwise and structural op gradients match finite differences") {
  Rng rng(17);
  Tensor a = random_tensor({3, 4}, rng, 1.0, true);
  Tensor b = random_tensor({3, 4}, rng, 1.0, true);
  Tensor v = random_tensor({4}, rng, 1.0, true);

  auto check = [&](const char* tag, std::function<Tensor()> f, double tol = 1e-6) {
    auto report = fd_check({{"a", a}, {"b", b}, {"v", v}}, f);
    INFO(tag << " worst at " << report.at);
    CHECK(report.max_rel_err <= tol);
  };

  check("add", [&]() { return sum_all(add(a, b)); });
  check("sub", [&]() { return sum_all(sub(a, b)); });
  check("mul", [&]() { return mean_all(mul(a, b)); });
  check("add_rowvec", [&]() { return sum_all(mul(add_rowvec(a, v), b)); });
  check("scale", [&]() { return sum_all(scale(a, -2.5)); });
  check("tanh", [&]() { return sum_all(mul(tanh(a), b)); });
  check("transpose", [&]() { return sum_all(mul(transpose(a), transpose(b))); });
  check("concat_cols", [&]() { return sum_all(concat_cols({a, mul(a, b), b})); });
  check("vstack", [&]() { return sum_all(mul(vstack({a, b}), vstack({b, a}))); });
  check("slice_rows", [&]() { return sum_all(slice_rows(a, 1, 2)); });
  check("slice_cols", [&]() { return sum_all(mul(slice_cols(a, 1, 2), slice_cols(b, 0, 2))); });
}

TEST_CASE("relu clamps negatives and passes gradient only where positive") {
  Tensor x = Tensor::row({-1, 0.5, 2}, true);
  x.zero_grad();
  Tensor y = relu(x);
  CHECK(y.at(0) == 0.0);
  CHECK(y.at(1) == doctest::Approx(0.5));
  sum_all(y).backward();
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 1.0);
}

TEST_CASE("log_clamped floors its argument") {
  Tensor x = Tensor::row({1.0, 1e-20}, true);
  Tensor y = log_clamped(x);
  CHECK(y.at(0) == doctest::Approx(0.0));
  CHECK(y.at(1) == doctest::Approx(std::log(1e-12)));
  x.zero_grad();
  sum_all(y).backward();
  CHECK(x.grad()[0] == doctest::Approx(1.0));
  CHECK(x.grad()[1] == 0.0);  // below the floor: clamped region has zero slope
}

TEST_CASE("rows_gather and take_per_row route gradients to the right slots") {
  Tensor table = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}, true);
  table.zero_grad();
  Tensor picked = rows_gather(table, {2, 0, 2});
  CHECK(picked.at(0, 0) == 5.0);
  CHECK(picked.at(1, 1) == 2.0);
  sum_all(picked).backward();
  CHECK(table.grad()[0] == 1.0);  // row 0 used once
  CHECK(table.grad()[4] == 2.0);  // row 2 used twice

  Tensor probs = Tensor::matrix({{0.2, 0.8}, {0.6, 0.4}}, true);
  probs.zero_grad();
  Tensor taken = take_per_row(probs, {1, 0});
  CHECK(taken.at(0) == doctest::Approx(0.8));
  CHECK(taken.at(1) == doctest::Approx(0.6));
  sum_all(taken).backward();
  CHECK(probs.grad()[1] == 1.0);
  CHECK(probs.grad()[2] == 1.0);
  CHECK(probs.grad()[0] == 0.0);
}

TEST_CASE("pair_similarity gradient matches finite differences") {
  Rng rng(23);
  Tensor a = random_tensor({3, 5}, rng, 1.0, true);
  Tensor b = random_tensor({4, 5}, rng, 1.0, true);
  Tensor w = random_tensor({20}, rng, 1.0, true);
  Tensor bias = random_tensor({1}, rng, 1.0, true);
  Tensor mixer = random_tensor({4, 1}, rng);
  auto report = fd_check({{"a", a}, {"b", b}, {"w", w}, {"bias", bias}}, [&]() {
    return sum_all(matmul(pair_similarity(a, b, w, bias), mixer));
  });
  CHECK(report.max_rel_err <= 1e-5);
}

TEST_CASE("spmm applies a constant sparse matrix and its transpose in backward") {
  SparseAdjacency adj;
  adj.nodes = 3;
  adj.entries = {{0, 1, 2.0}, {2, 0, 0.5}};
  Tensor x = Tensor::matrix({{1, 1}, {2, 3}, {4, 5}}, true);
  x.zero_grad();
  Tensor y = spmm(adj, x);
  CHECK(y.at(0, 0) == doctest::Approx(4.0));
  CHECK(y.at(0, 1) == doctest::Approx(6.0));
  CHECK(y.at(1, 0) == 0.0);
  CHECK(y.at(2, 0) == doctest::Approx(0.5));
  sum_all(y).backward();
  CHECK(x.grad()[0] == doctest::Approx(0.5));  // from entry (2,0)
  CHECK(x.grad()[2] == doctest::Approx(2.0));  // from entry (0,1)
  CHECK(x.grad()[4] == 0.0);
}

TEST_CASE("no-grad mode skips the tape") {
  Tensor x = Tensor::row({1, 2}, true);
  NoGradGuard guard;
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.impl()->parents.empty());
}

TEST_CASE("finite check names the offending op") {
  Tensor x = Tensor::row({1e308, 1e308});
  FiniteCheckGuard guard;
  CHECK_THROWS_AS(mul(x, x), NonFiniteError);
  try {
    mul(x, x);
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("mul") != std::string::npos);
  }
}

TEST_CASE("xavier init is deterministic, bounded, and centered") {
  Tensor a = xavier_init({100, 100}, 42);
  Tensor b = xavier_init({100, 100}, 42);
  CHECK(a.data() == b.data());
  Tensor c = xavier_init({100, 100}, 43);
  CHECK(a.data() != c.data());

  const double limit = std::sqrt(6.0 / 200.0);
  double mean = 0.0;
  for (double v : a.data()) {
    CHECK(std::abs(v) <= limit);
    mean += v;
  }
  mean /= static_cast<double>(a.size());
  CHECK(std::abs(mean) <= 0.02);
}

TEST_CASE("adam takes the textbook first step and ignores zero gradients") {
  ParamStore store;
  Tensor p = store.add("p", Tensor::row({0.0}));
  AdamState adam;
  adam.learning_rate = 0.1;
  store.zero_grad();
  p.grad()[0] = 1.0;
  adam_step(adam, store);
  CHECK(p.data()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p.grad()[0] == 0.0);  // cleared by the step

  ParamStore store2;
  Tensor q = store2.add("q", Tensor::row({1.5}));
  AdamState adam2;
  store2.zero_grad();
  adam_step(adam2, store2);
  CHECK(q.data()[0] == 1.5);
}

TEST_CASE("adam defaults match the advertised hyperparameters") {
  AdamState adam;
  CHECK(adam.learning_rate == 1e-4);
  CHECK(adam.beta1 == 0.9);
  CHECK(adam.beta2 == 0.999);
  CHECK(adam.epsilon == 1e-8);
}

TEST_CASE("adam without gradients is a contract error") {
  ParamStore store;
  store.add("p", Tensor::row({0.0}));
  AdamState adam;
  CHECK_THROWS_AS(adam_step(adam, store), ContractError);
}

TEST_CASE("param store rejects duplicate names") {
  ParamStore store;
  store.add("w", Tensor::row({1.0}));
  CHECK_THROWS_AS(store.add("w", Tensor::row({2.0})), ContractError);
}

TEST_CASE("checkpoint round-trips parameters and optimizer state bit-exactly") {
  testutil::TempDir dir("ckpt");
  ParamStore store;
  Rng rng(3);
  store.add("alpha", testutil::random_tensor({3, 4}, rng));
  store.add("beta", testutil::random_tensor({5}, rng));
  AdamState adam;
  adam.learning_rate = 0.01;
  store.zero_grad();
  for (const auto& n : store.names())
    for (auto& g : store.get(n).impl()->grad) g = rng.uniform(-1, 1);
  adam_step(adam, store);

  const std::string path = dir.file("model.ckpt");
  save_checkpoint(path, store, &adam, "{\"k\":1}");
  CheckpointData data = read_checkpoint(path);
  CHECK(data.version == 1);
  CHECK(data.meta_json == "{\"k\":1}");
  CHECK(data.has_adam);
  CHECK(data.adam.step == 1);

  ParamStore fresh;
  fresh.add("alpha", Tensor::zeros({3, 4}));
  fresh.add("beta", Tensor::zeros({5}));
  AdamState adam2;
  load_checkpoint_into(data, fresh, &adam2);
  CHECK(fresh.get("alpha").data() == store.get("alpha").data());
  CHECK(fresh.get("beta").data() == store.get("beta").data());
  CHECK(adam2.m.at("alpha") == adam.m.at("alpha"));
  CHECK(adam2.learning_rate == 0.01);
}

TEST_CASE("checkpoint with unknown or missing parameters fails loudly") {
  testutil::TempDir dir("ckpt_bad");
  ParamStore store;
  store.add("w", Tensor::row({1, 2, 3}));
  const std::string path = dir.file("m.ckpt");
  save_checkpoint(path, store, nullptr, "{}");
  CheckpointData data = read_checkpoint(path);

  ParamStore other;
  other.add("different", Tensor::row({1, 2, 3}));
  CHECK_THROWS_AS(load_checkpoint_into(data, other, nullptr), ValidationError);

  ParamStore wrong_shape;
  wrong_shape.add("w", Tensor::row({1, 2}));
  CHECK_THROWS_AS(load_checkpoint_into(data, wrong_shape, nullptr), ValidationError);
}
