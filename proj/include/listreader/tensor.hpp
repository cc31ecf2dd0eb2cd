#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "listreader/errors.hpp"

namespace listreader {

namespace detail {

// One node of the define-by-run tape. Ops allocate a fresh node per result;
// the backward closure pulls this node's grad and accumulates into parents.
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily allocated, same length as data when present
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// While a NoGradGuard is alive (per thread), ops skip tape construction and
// results never require grad. Used for evaluation passes.
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// While a FiniteCheckGuard is alive (per thread), every op scans its output
// and throws NonFiniteError naming the op that first produced NaN/inf.
bool finite_check_enabled();
class FiniteCheckGuard {
 public:
  FiniteCheckGuard();
  ~FiniteCheckGuard();
  FiniteCheckGuard(const FiniteCheckGuard&) = delete;
  FiniteCheckGuard& operator=(const FiniteCheckGuard&) = delete;

 private:
  bool prev_;
};

// Shared handle to a tape node. Copies alias the same storage. All values are
// double precision; shapes are rank-1 or rank-2 with strictly positive dims.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor row(std::vector<double> v, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int rank() const;
  std::size_t size() const;
  int rows() const;  // rank-2 only
  int cols() const;  // rank-2 only
  int last_dim() const;
  double value() const;  // single-element tensors
  double at(int i) const;
  double at(int i, int j) const;
  std::vector<double>& data();
  const std::vector<double>& data() const;

  bool requires_grad() const;
  void set_requires_grad(bool v);  // leaves only
  bool has_grad() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar. Gradients accumulate additively into
  // every reachable node that requires grad.
  void backward() const;

  std::string shape_str() const;

  detail::TensorNode* impl() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& handle() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  friend Tensor make_tensor(std::vector<int> shape, std::vector<double> data);
  std::shared_ptr<detail::TensorNode> node_;
};

// Constant symmetric adjacency in coordinate form; not a tape node.
struct SparseAdjacency {
  struct Entry {
    int row;
    int col;
    double weight;
  };
  int nodes = 0;
  std::vector<Entry> entries;
};

// --- ops ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// matrix [r x c] plus a rank-1 vector [c] broadcast over rows
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
// ln(max(x, floor)); zero gradient below the floor
Tensor log_clamped(const Tensor& a, double floor = 1e-12);
Tensor softmax_last_axis(const Tensor& a);
// per-row normalization over the last axis, then y = gamma * xhat + beta
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor vstack(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int start, int len);
Tensor slice_cols(const Tensor& a, int start, int len);
// rows of an embedding table by id; backward scatter-adds into the table
Tensor rows_gather(const Tensor& table, const std::vector<int>& ids);
// out[i] = a[i, idx[i]]
Tensor take_per_row(const Tensor& a, const std::vector<int>& idx);
// u[i,j] = w . concat(a_i, b_j, |a_i - b_j|, a_i * b_j) + bias, w has length 4d
Tensor pair_similarity(const Tensor& a, const Tensor& b, const Tensor& w, const Tensor& bias);
// y = A x for a constant sparse matrix; backward applies the transpose
Tensor spmm(const SparseAdjacency& adj, const Tensor& x);

// Xavier-uniform fill in [-sqrt(6/(fan_in+fan_out)), +...]; pure in (shape, seed).
Tensor xavier_init(const std::vector<int>& shape, std::uint64_t seed);

}  // namespace listreader
