#include "listreader/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace listreader {

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_finite_check = false;

std::size_t shape_product(const std::vector<int>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

using detail::TensorNode;

Tensor make_result(std::vector<int> shape, std::vector<double> data, const char* op) {
  Tensor t = Tensor::from(std::move(shape), std::move(data));
  t.impl()->op = op;
  if (g_finite_check) {
    for (double v : t.impl()->data) {
      if (!std::isfinite(v)) {
        throw NonFiniteError(std::string("non-finite value produced by op '") + op +
                             "' with shape " + shape_to_string(t.shape()));
      }
    }
  }
  return t;
}

// Records parents and the backward closure when grad mode is on and at least
// one parent requires grad. Closures capture raw node pointers; the parent
// list on the result node keeps them alive.
void attach(Tensor& out, std::initializer_list<Tensor> parents, std::function<void()> backward) {
  if (!g_grad_enabled) return;
  bool need = false;
  for (const Tensor& p : parents) need = need || p.requires_grad();
  if (!need) return;
  TensorNode* n = out.impl();
  n->requires_grad = true;
  for (const Tensor& p : parents) n->parents.push_back(p.handle());
  n->backward = std::move(backward);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got shape " + t.shape_str());
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool finite_check_enabled() { return g_finite_check; }

FiniteCheckGuard::FiniteCheckGuard() : prev_(g_finite_check) { g_finite_check = true; }
FiniteCheckGuard::~FiniteCheckGuard() { g_finite_check = prev_; }

// --- Tensor basics -------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  std::size_t n = shape_product(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  std::size_t n = shape_product(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
  std::size_t n = shape_product(shape);
  if (n != data.size())
    throw DimensionError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

Tensor Tensor::row(std::vector<double> v, bool requires_grad) {
  int n = static_cast<int>(v.size());
  return from({n}, std::move(v), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  int r = static_cast<int>(rows.size());
  if (r == 0) throw DimensionError("Tensor::matrix: empty row list");
  int c = static_cast<int>(rows.begin()->size());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw DimensionError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(data), requires_grad);
}

const std::vector<int>& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::size_t Tensor::size() const {
  require_defined(*this, "size");
  return node_->data.size();
}

int Tensor::rows() const {
  require_rank2(*this, "rows");
  return node_->shape[0];
}

int Tensor::cols() const {
  require_rank2(*this, "cols");
  return node_->shape[1];
}

int Tensor::last_dim() const { return shape().back(); }

double Tensor::value() const {
  if (size() != 1)
    throw ContractError("Tensor::value: tensor has " + std::to_string(size()) + " elements");
  return node_->data[0];
}

double Tensor::at(int i) const {
  require_defined(*this, "at");
  if (i < 0 || static_cast<std::size_t>(i) >= node_->data.size())
    throw ContractError("Tensor::at: index out of range");
  return node_->data[static_cast<std::size_t>(i)];
}

double Tensor::at(int i, int j) const {
  require_rank2(*this, "at");
  if (i < 0 || i >= node_->shape[0] || j < 0 || j >= node_->shape[1])
    throw ContractError("Tensor::at: index out of range");
  return node_->data[static_cast<std::size_t>(i) * node_->shape[1] + j];
}

std::vector<double>& Tensor::data() {
  require_defined(*this, "data");
  return node_->data;
}

const std::vector<double>& Tensor::data() const {
  require_defined(*this, "data");
  return node_->data;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  require_defined(*this, "set_requires_grad");
  if (!node_->parents.empty())
    throw ContractError("set_requires_grad: only leaf tensors may change grad mode");
  node_->requires_grad = v;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size(); }

std::vector<double>& Tensor::grad() {
  require_defined(*this, "grad");
  if (!has_grad()) throw ContractError("Tensor::grad: gradient not allocated");
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
  require_defined(*this, "grad");
  if (!has_grad()) throw ContractError("Tensor::grad: gradient not allocated");
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (node_->data.size() != 1)
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; reverse post-order runs consumers before producers.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  visited.insert(node_.get());
  stack.emplace_back(node_.get(), 0);
  while (!stack.empty()) {
    TensorNode* n = stack.back().first;
    std::size_t idx = stack.back().second;
    if (idx < n->parents.size()) {
      ++stack.back().second;
      TensorNode* p = n->parents[idx].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

std::string Tensor::shape_str() const {
  require_defined(*this, "shape_str");
  return shape_to_string(node_->shape);
}

// --- ops -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const int p = a.rows(), q = a.cols(), r = b.cols();
  if (b.rows() != q)
    throw DimensionError("matmul: inner dimensions differ: " + a.shape_str() + " vs " +
                         b.shape_str());
  std::vector<double> out(static_cast<std::size_t>(p) * r, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (int i = 0; i < p; ++i) {
    double* crow = out.data() + static_cast<std::size_t>(i) * r;
    const double* arow = A + static_cast<std::size_t>(i) * q;
    for (int k = 0; k < q; ++k) {
      const double av = arow[k];
      const double* brow = B + static_cast<std::size_t>(k) * r;
      for (int j = 0; j < r; ++j) crow[j] += av * brow[j];
    }
  }
  Tensor res = make_result({p, r}, std::move(out), "matmul");
  TensorNode* an = a.impl();
  TensorNode* bn = b.impl();
  TensorNode* on = res.impl();
  attach(res, {a, b}, [an, bn, on, p, q, r]() {
    const double* G = on->grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      double* dA = an->grad.data();
      const double* B = bn->data.data();
      for (int i = 0; i < p; ++i) {
        const double* grow = G + static_cast<std::size_t>(i) * r;
        double* darow = dA + static_cast<std::size_t>(i) * q;
        for (int k = 0; k < q; ++k) {
          const double* brow = B + static_cast<std::size_t>(k) * r;
          double s = 0.0;
          for (int j = 0; j < r; ++j) s += grow[j] * brow[j];
          darow[k] += s;
        }
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      double* dB = bn->grad.data();
      const double* A = an->data.data();
      for (int i = 0; i < p; ++i) {
        const double* arow = A + static_cast<std::size_t>(i) * q;
        const double* grow = G + static_cast<std::size_t>(i) * r;
        for (int k = 0; k < q; ++k) {
          const double av = arow[k];
          if (av == 0.0) continue;
          double* dbrow = dB + static_cast<std::size_t>(k) * r;
          for (int j = 0; j < r; ++j) dbrow[j] += av * grow[j];
        }
      }
    }
  });
  return res;
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  require_rank2(a, "transpose");
  const int r = a.rows(), c = a.cols();
  std::vector<double> out(static_cast<std::size_t>(r) * c);
  const double* A = a.data().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j) * r + i] = A[static_cast<std::size_t>(i) * c + j];
  Tensor res = make_result({c, r}, std::move(out), "transpose");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, r, c]() {
    an->ensure_grad();
    const double* G = on->grad.data();
    double* dA = an->grad.data();
    for (int j = 0; j < c; ++j)
      for (int i = 0; i < r; ++i)
        dA[static_cast<std::size_t>(i) * c + j] += G[static_cast<std::size_t>(j) * r + i];
  });
  return res;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  if (a.shape() != b.shape())
    throw DimensionError("add: shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  Tensor res = make_result(a.shape(), std::move(out), "add");
  TensorNode* an = a.impl();
  TensorNode* bn = b.impl();
  TensorNode* on = res.impl();
  attach(res, {a, b}, [an, bn, on]() {
    const double* G = on->grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += G[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) bn->grad[i] += G[i];
    }
  });
  return res;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  if (a.shape() != b.shape())
    throw DimensionError("sub: shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  Tensor res = make_result(a.shape(), std::move(out), "sub");
  TensorNode* an = a.impl();
  TensorNode* bn = b.impl();
  TensorNode* on = res.impl();
  attach(res, {a, b}, [an, bn, on]() {
    const double* G = on->grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += G[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) bn->grad[i] -= G[i];
    }
  });
  return res;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  require_defined(m, "add_rowvec");
  require_defined(v, "add_rowvec");
  require_rank2(m, "add_rowvec");
  if (v.rank() != 1 || v.last_dim() != m.cols())
    throw DimensionError("add_rowvec: vector " + v.shape_str() + " does not match matrix " +
                         m.shape_str());
  const int r = m.rows(), c = m.cols();
  std::vector<double> out(m.size());
  const double* M = m.data().data();
  const double* V = v.data().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(i) * c + j] = M[static_cast<std::size_t>(i) * c + j] + V[j];
  Tensor res = make_result({r, c}, std::move(out), "add_rowvec");
  TensorNode* mn = m.impl();
  TensorNode* vn = v.impl();
  TensorNode* on = res.impl();
  attach(res, {m, v}, [mn, vn, on, r, c]() {
    const double* G = on->grad.data();
    if (mn->requires_grad) {
      mn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) mn->grad[i] += G[i];
    }
    if (vn->requires_grad) {
      vn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) vn->grad[j] += G[static_cast<std::size_t>(i) * c + j];
    }
  });
  return res;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  if (a.shape() != b.shape())
    throw DimensionError("mul: shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  Tensor res = make_result(a.shape(), std::move(out), "mul");
  TensorNode* an = a.impl();
  TensorNode* bn = b.impl();
  TensorNode* on = res.impl();
  attach(res, {a, b}, [an, bn, on]() {
    const double* G = on->grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += G[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < on->size(); ++i) bn->grad[i] += G[i] * an->data[i];
    }
  });
  return res;
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * s;
  Tensor res = make_result(a.shape(), std::move(out), "scale");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, s]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += s * on->grad[i];
  });
  return res;
}

Tensor add_scalar(const Tensor& a, double c) {
  require_defined(a, "add_scalar");
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + c;
  Tensor res = make_result(a.shape(), std::move(out), "add_scalar");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += on->grad[i];
  });
  return res;
}

Tensor relu(const Tensor& a) {
  require_defined(a, "relu");
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
  Tensor res = make_result(a.shape(), std::move(out), "relu");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->size(); ++i)
      if (an->data[i] > 0.0) an->grad[i] += on->grad[i];
  });
  return res;
}

Tensor tanh(const Tensor& a) {
  require_defined(a, "tanh");
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(A[i]);
  Tensor res = make_result(a.shape(), std::move(out), "tanh");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->size(); ++i) {
      const double y = on->data[i];
      an->grad[i] += on->grad[i] * (1.0 - y * y);
    }
  });
  return res;
}

Tensor log_clamped(const Tensor& a, double floor) {
  require_defined(a, "log_clamped");
  if (floor <= 0.0) throw ContractError("log_clamped: floor must be positive");
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(A[i], floor));
  Tensor res = make_result(a.shape(), std::move(out), "log_clamped");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, floor]() {
    an->ensure_grad();
    for (std::size_t i = 0; i < on->size(); ++i)
      if (an->data[i] >= floor) an->grad[i] += on->grad[i] / an->data[i];
  });
  return res;
}

Tensor softmax_last_axis(const Tensor& a) {
  require_defined(a, "softmax_last_axis");
  const int c = a.last_dim();
  const std::size_t outer = a.size() / static_cast<std::size_t>(c);
  std::vector<double> out(a.size());
  const double* A = a.data().data();
  for (std::size_t i = 0; i < outer; ++i) {
    const double* x = A + i * c;
    double* y = out.data() + i * c;
    double mx = x[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (int j = 0; j < c; ++j) y[j] /= z;
  }
  Tensor res = make_result(a.shape(), std::move(out), "softmax");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, outer, c]() {
    an->ensure_grad();
    const double* Y = on->data.data();
    const double* G = on->grad.data();
    for (std::size_t i = 0; i < outer; ++i) {
      const double* y = Y + i * c;
      const double* g = G + i * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g[j] * y[j];
      double* da = an->grad.data() + i * c;
      for (int j = 0; j < c; ++j) da[j] += y[j] * (g[j] - dot);
    }
  });
  return res;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  const int c = x.last_dim();
  if (gamma.rank() != 1 || gamma.last_dim() != c || beta.rank() != 1 || beta.last_dim() != c)
    throw DimensionError("layer_norm: gamma/beta " + gamma.shape_str() + "/" + beta.shape_str() +
                         " do not match feature size " + std::to_string(c));
  const std::size_t outer = x.size() / static_cast<std::size_t>(c);
  std::vector<double> out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(outer);
  const double* X = x.data().data();
  const double* Gm = gamma.data().data();
  const double* Bt = beta.data().data();
  for (std::size_t i = 0; i < outer; ++i) {
    const double* row = X + i * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[i] = inv;
    double* xh = xhat.data() + i * c;
    double* y = out.data() + i * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = (row[j] - mean) * inv;
      y[j] = xh[j] * Gm[j] + Bt[j];
    }
  }
  Tensor res = make_result(x.shape(), std::move(out), "layer_norm");
  TensorNode* xn = x.impl();
  TensorNode* gn = gamma.impl();
  TensorNode* bn = beta.impl();
  TensorNode* on = res.impl();
  attach(res, {x, gamma, beta},
         [xn, gn, bn, on, outer, c, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
           const double* G = on->grad.data();
           const double* Gm = gn->data.data();
           if (gn->requires_grad) {
             gn->ensure_grad();
             for (std::size_t i = 0; i < outer; ++i)
               for (int j = 0; j < c; ++j) gn->grad[j] += G[i * c + j] * xhat[i * c + j];
           }
           if (bn->requires_grad) {
             bn->ensure_grad();
             for (std::size_t i = 0; i < outer; ++i)
               for (int j = 0; j < c; ++j) bn->grad[j] += G[i * c + j];
           }
           if (xn->requires_grad) {
             xn->ensure_grad();
             for (std::size_t i = 0; i < outer; ++i) {
               const double* g = G + i * c;
               const double* xh = xhat.data() + i * c;
               double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
               for (int j = 0; j < c; ++j) {
                 const double dxh = g[j] * Gm[j];
                 mean_dxhat += dxh;
                 mean_dxhat_xhat += dxh * xh[j];
               }
               mean_dxhat /= c;
               mean_dxhat_xhat /= c;
               double* dx = xn->grad.data() + i * c;
               for (int j = 0; j < c; ++j) {
                 const double dxh = g[j] * Gm[j];
                 dx[j] += inv_std[i] * (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat);
               }
             }
           }
         });
  return res;
}

Tensor sum_all(const Tensor& a) {
  require_defined(a, "sum_all");
  double s = 0.0;
  for (double v : a.data()) s += v;
  Tensor res = make_result({1}, {s}, "sum_all");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on]() {
    an->ensure_grad();
    const double g = on->grad[0];
    for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += g;
  });
  return res;
}

Tensor mean_all(const Tensor& a) {
  require_defined(a, "mean_all");
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.size());
  Tensor res = make_result({1}, {s / n}, "mean_all");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, n]() {
    an->ensure_grad();
    const double g = on->grad[0] / n;
    for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += g;
  });
  return res;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no tensors given");
  for (const Tensor& t : parts) {
    require_defined(t, "concat_cols");
    require_rank2(t, "concat_cols");
  }
  const int r = parts[0].rows();
  int total = 0;
  for (const Tensor& t : parts) {
    if (t.rows() != r)
      throw DimensionError("concat_cols: row count mismatch: " + parts[0].shape_str() + " vs " +
                           t.shape_str());
    total += t.cols();
  }
  std::vector<double> out(static_cast<std::size_t>(r) * total);
  int off = 0;
  for (const Tensor& t : parts) {
    const int c = t.cols();
    const double* A = t.data().data();
    for (int i = 0; i < r; ++i)
      std::memcpy(out.data() + static_cast<std::size_t>(i) * total + off,
                  A + static_cast<std::size_t>(i) * c, sizeof(double) * c);
    off += c;
  }
  Tensor res = make_result({r, total}, std::move(out), "concat_cols");
  std::vector<TensorNode*> pn;
  std::vector<int> widths;
  bool need = false;
  for (const Tensor& t : parts) {
    pn.push_back(t.impl());
    widths.push_back(t.cols());
    need = need || t.requires_grad();
  }
  if (grad_enabled() && need) {
    TensorNode* on = res.impl();
    for (const Tensor& t : parts) on->parents.push_back(t.handle());
    on->requires_grad = true;
    on->backward = [pn, widths, on, r, total]() {
      const double* G = on->grad.data();
      int off = 0;
      for (std::size_t k = 0; k < pn.size(); ++k) {
        const int c = widths[k];
        if (pn[k]->requires_grad) {
          pn[k]->ensure_grad();
          double* dA = pn[k]->grad.data();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
              dA[static_cast<std::size_t>(i) * c + j] +=
                  G[static_cast<std::size_t>(i) * total + off + j];
        }
        off += c;
      }
    };
  }
  return res;
}

Tensor vstack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("vstack: no tensors given");
  for (const Tensor& t : parts) {
    require_defined(t, "vstack");
    require_rank2(t, "vstack");
  }
  const int c = parts[0].cols();
  int total = 0;
  for (const Tensor& t : parts) {
    if (t.cols() != c)
      throw DimensionError("vstack: column count mismatch: " + parts[0].shape_str() + " vs " +
                           t.shape_str());
    total += t.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * c);
  for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  Tensor res = make_result({total, c}, std::move(out), "vstack");
  std::vector<TensorNode*> pn;
  std::vector<int> heights;
  bool need = false;
  for (const Tensor& t : parts) {
    pn.push_back(t.impl());
    heights.push_back(t.rows());
    need = need || t.requires_grad();
  }
  if (grad_enabled() && need) {
    TensorNode* on = res.impl();
    for (const Tensor& t : parts) on->parents.push_back(t.handle());
    on->requires_grad = true;
    on->backward = [pn, heights, on, c]() {
      const double* G = on->grad.data();
      std::size_t off = 0;
      for (std::size_t k = 0; k < pn.size(); ++k) {
        const std::size_t n = static_cast<std::size_t>(heights[k]) * c;
        if (pn[k]->requires_grad) {
          pn[k]->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) pn[k]->grad[i] += G[off + i];
        }
        off += n;
      }
    };
  }
  return res;
}

Tensor slice_rows(const Tensor& a, int start, int len) {
  require_defined(a, "slice_rows");
  require_rank2(a, "slice_rows");
  const int r = a.rows(), c = a.cols();
  if (start < 0 || len <= 0 || start + len > r)
    throw DimensionError("slice_rows: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " + a.shape_str());
  std::vector<double> out(a.data().begin() + static_cast<std::size_t>(start) * c,
                          a.data().begin() + static_cast<std::size_t>(start + len) * c);
  Tensor res = make_result({len, c}, std::move(out), "slice_rows");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, start, c, len]() {
    an->ensure_grad();
    const double* G = on->grad.data();
    double* dA = an->grad.data() + static_cast<std::size_t>(start) * c;
    for (std::size_t i = 0; i < static_cast<std::size_t>(len) * c; ++i) dA[i] += G[i];
  });
  return res;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  require_defined(a, "slice_cols");
  require_rank2(a, "slice_cols");
  const int r = a.rows(), c = a.cols();
  if (start < 0 || len <= 0 || start + len > c)
    throw DimensionError("slice_cols: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside " + a.shape_str());
  std::vector<double> out(static_cast<std::size_t>(r) * len);
  const double* A = a.data().data();
  for (int i = 0; i < r; ++i)
    std::memcpy(out.data() + static_cast<std::size_t>(i) * len,
                A + static_cast<std::size_t>(i) * c + start, sizeof(double) * len);
  Tensor res = make_result({r, len}, std::move(out), "slice_cols");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, start, c, r, len]() {
    an->ensure_grad();
    const double* G = on->grad.data();
    for (int i = 0; i < r; ++i) {
      double* dA = an->grad.data() + static_cast<std::size_t>(i) * c + start;
      const double* g = G + static_cast<std::size_t>(i) * len;
      for (int j = 0; j < len; ++j) dA[j] += g[j];
    }
  });
  return res;
}

Tensor rows_gather(const Tensor& table, const std::vector<int>& ids) {
  require_defined(table, "rows_gather");
  require_rank2(table, "rows_gather");
  if (ids.empty()) throw ContractError("rows_gather: empty id list");
  const int v = table.rows(), d = table.cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw ContractError("rows_gather: id " + std::to_string(id) + " outside table " +
                          table.shape_str());
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<std::size_t>(n) * d);
  const double* T = table.data().data();
  for (int i = 0; i < n; ++i)
    std::memcpy(out.data() + static_cast<std::size_t>(i) * d,
                T + static_cast<std::size_t>(ids[i]) * d, sizeof(double) * d);
  Tensor res = make_result({n, d}, std::move(out), "rows_gather");
  TensorNode* tn = table.impl();
  TensorNode* on = res.impl();
  attach(res, {table}, [tn, on, ids, n, d]() {
    tn->ensure_grad();
    const double* G = on->grad.data();
    for (int i = 0; i < n; ++i) {
      double* dT = tn->grad.data() + static_cast<std::size_t>(ids[i]) * d;
      const double* g = G + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) dT[j] += g[j];
    }
  });
  return res;
}

Tensor take_per_row(const Tensor& a, const std::vector<int>& idx) {
  require_defined(a, "take_per_row");
  require_rank2(a, "take_per_row");
  const int r = a.rows(), c = a.cols();
  if (static_cast<int>(idx.size()) != r)
    throw DimensionError("take_per_row: " + std::to_string(idx.size()) + " indices for " +
                         a.shape_str());
  for (int j : idx)
    if (j < 0 || j >= c) throw ContractError("take_per_row: column index out of range");
  std::vector<double> out(static_cast<std::size_t>(r));
  const double* A = a.data().data();
  for (int i = 0; i < r; ++i) out[i] = A[static_cast<std::size_t>(i) * c + idx[i]];
  Tensor res = make_result({r}, std::move(out), "take_per_row");
  TensorNode* an = a.impl();
  TensorNode* on = res.impl();
  attach(res, {a}, [an, on, idx, r, c]() {
    an->ensure_grad();
    for (int i = 0; i < r; ++i)
      an->grad[static_cast<std::size_t>(i) * c + idx[i]] += on->grad[i];
  });
  return res;
}

Tensor pair_similarity(const Tensor& a, const Tensor& b, const Tensor& w, const Tensor& bias) {
  require_defined(a, "pair_similarity");
  require_defined(b, "pair_similarity");
  require_defined(w, "pair_similarity");
  require_defined(bias, "pair_similarity");
  require_rank2(a, "pair_similarity");
  require_rank2(b, "pair_similarity");
  const int m = a.rows(), d = a.cols(), n = b.rows();
  if (b.cols() != d)
    throw DimensionError("pair_similarity: feature size mismatch: " + a.shape_str() + " vs " +
                         b.shape_str());
  if (w.rank() != 1 || w.last_dim() != 4 * d)
    throw DimensionError("pair_similarity: weight " + w.shape_str() + " must have length " +
                         std::to_string(4 * d));
  if (bias.size() != 1) throw DimensionError("pair_similarity: bias must be a scalar");
  const double* A = a.data().data();
  const double* B = b.data().data();
  const double* wa = w.data().data();
  const double* wb = wa + d;
  const double* wc = wa + 2 * d;
  const double* wd = wa + 3 * d;
  const double b0 = bias.data()[0];

  std::vector<double> arow_dot(m, 0.0), brow_dot(n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* ai = A + static_cast<std::size_t>(i) * d;
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += wa[k] * ai[k];
    arow_dot[i] = s;
  }
  for (int j = 0; j < n; ++j) {
    const double* bj = B + static_cast<std::size_t>(j) * d;
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += wb[k] * bj[k];
    brow_dot[j] = s;
  }
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    const double* ai = A + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < n; ++j) {
      const double* bj = B + static_cast<std::size_t>(j) * d;
      double s = b0 + arow_dot[i] + brow_dot[j];
      for (int k = 0; k < d; ++k) {
        const double diff = ai[k] - bj[k];
        s += wc[k] * std::abs(diff) + wd[k] * ai[k] * bj[k];
      }
      out[static_cast<std::size_t>(i) * n + j] = s;
    }
  }
  Tensor res = make_result({m, n}, std::move(out), "pair_similarity");
  TensorNode* an = a.impl();
  TensorNode* bn = b.impl();
  TensorNode* wn = w.impl();
  TensorNode* biasn = bias.impl();
  TensorNode* on = res.impl();
  attach(res, {a, b, w, bias}, [an, bn, wn, biasn, on, m, n, d]() {
    const double* G = on->grad.data();
    const double* A = an->data.data();
    const double* B = bn->data.data();
    const double* wa = wn->data.data();
    const double* wb = wa + d;
    const double* wc = wa + 2 * d;
    const double* wd = wa + 3 * d;
    const bool ga = an->requires_grad, gb = bn->requires_grad;
    const bool gw = wn->requires_grad, gbias = biasn->requires_grad;
    if (ga) an->ensure_grad();
    if (gb) bn->ensure_grad();
    if (gw) wn->ensure_grad();
    if (gbias) biasn->ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* ai = A + static_cast<std::size_t>(i) * d;
      double* dai = ga ? an->grad.data() + static_cast<std::size_t>(i) * d : nullptr;
      for (int j = 0; j < n; ++j) {
        const double g = G[static_cast<std::size_t>(i) * n + j];
        if (g == 0.0) continue;
        const double* bj = B + static_cast<std::size_t>(j) * d;
        double* dbj = gb ? bn->grad.data() + static_cast<std::size_t>(j) * d : nullptr;
        if (gbias) biasn->grad[0] += g;
        for (int k = 0; k < d; ++k) {
          const double diff = ai[k] - bj[k];
          const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          if (gw) {
            wn->grad[k] += g * ai[k];
            wn->grad[d + k] += g * bj[k];
            wn->grad[2 * d + k] += g * std::abs(diff);
            wn->grad[3 * d + k] += g * ai[k] * bj[k];
          }
          if (ga) dai[k] += g * (wa[k] + wc[k] * sgn + wd[k] * bj[k]);
          if (gb) dbj[k] += g * (wb[k] - wc[k] * sgn + wd[k] * ai[k]);
        }
      }
    }
  });
  return res;
}

Tensor spmm(const SparseAdjacency& adj, const Tensor& x) {
  require_defined(x, "spmm");
  require_rank2(x, "spmm");
  if (x.rows() != adj.nodes)
    throw DimensionError("spmm: adjacency over " + std::to_string(adj.nodes) +
                         " nodes applied to " + x.shape_str());
  const int d = x.cols();
  std::vector<double> out(static_cast<std::size_t>(adj.nodes) * d, 0.0);
  const double* X = x.data().data();
  for (const auto& e : adj.entries) {
    const double* src = X + static_cast<std::size_t>(e.col) * d;
    double* dst = out.data() + static_cast<std::size_t>(e.row) * d;
    for (int j = 0; j < d; ++j) dst[j] += e.weight * src[j];
  }
  Tensor res = make_result({adj.nodes, d}, std::move(out), "spmm");
  TensorNode* xn = x.impl();
  TensorNode* on = res.impl();
  const std::vector<SparseAdjacency::Entry> entries = adj.entries;
  attach(res, {x}, [xn, on, entries, d]() {
    xn->ensure_grad();
    const double* G = on->grad.data();
    for (const auto& e : entries) {
      const double* g = G + static_cast<std::size_t>(e.row) * d;
      double* dx = xn->grad.data() + static_cast<std::size_t>(e.col) * d;
      for (int j = 0; j < d; ++j) dx[j] += e.weight * g[j];
    }
  });
  return res;
}

Tensor xavier_init(const std::vector<int>& shape, std::uint64_t seed) {
  std::size_t n = shape_product(shape);
  int fan_in = shape[0];
  int fan_out = shape.size() >= 2 ? shape[1] : 1;
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::mt19937_64 gen(seed);
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(gen() >> 11) * (1.0 / 9007199254740992.0);
    data[i] = (2.0 * u - 1.0) * limit;
  }
  return Tensor::from(shape, std::move(data));
}

}  // namespace listreader
