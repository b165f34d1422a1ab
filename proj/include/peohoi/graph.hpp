#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "peohoi/common.hpp"
#include "peohoi/tensor.hpp"

// Reverse-mode tape over dense tensors.
//
// A Graph records every primitive executed in a forward pass. backward(loss)
// replays the tape in reverse and accumulates dLoss/dParam into every
// Parameter that was mounted on the graph. A graph is single-owner and
// single-use: one forward build, at most one backward.
//
// All primitives are pure given (inputs, parameters), so values mounted on a
// graph are snapshots; mutating a Parameter between forward and backward is
// not supported.

namespace peohoi {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Tensor<T>::zeros(value.shape);
  }
};

// Owns parameters in registration order; the order defines the checkpoint
// manifest layout.
template <typename T>
class ParamSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value, bool trainable = true) {
    if (index_.count(name)) throw UsageError(strf("duplicate parameter name: ", name));
    index_[name] = int(params_.size());
    params_.emplace_back(std::move(name), std::move(value), trainable);
    return params_.back();
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  size_t size() const { return params_.size(); }
  Parameter<T>& operator[](size_t i) { return params_[i]; }
  const Parameter<T>& operator[](size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads() {
    for (auto& p : params_) p.grad.fill(T(0));
  }

  int64_t total_elems() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

 private:
  std::deque<Parameter<T>> params_;  // deque: stable addresses for handles
  std::unordered_map<std::string, int> index_;
};

template <typename T>
class Graph;

template <typename T>
struct Val {
  Graph<T>* g = nullptr;
  int id = -1;
};

template <typename T>
class Graph {
 public:
  // When set, every primitive's output is scanned and a non-finite value
  // raises a NumericError naming the primitive.
  bool check_finite = false;

  int leaf(Tensor<T> v) { return add_node("leaf", std::move(v), {}); }

  Val<T> constant(Tensor<T> v) { return {this, leaf(std::move(v))}; }

  Val<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return {this, it->second};
    int id = add_node("param", p.value, {});
    param_nodes_[&p] = id;
    bindings_.push_back({id, &p});
    return {this, id};
  }

  const Tensor<T>& value(int id) const { return nodes_[id].val; }
  const Tensor<T>& value(Val<T> v) const { return nodes_[v.id].val; }

  Tensor<T>& grad_mut(int id) {
    Tensor<T>& g = nodes_[id].grad;
    if (g.data.empty()) g = Tensor<T>::zeros(nodes_[id].val.shape);
    nodes_[id].has_grad = true;
    return g;
  }

  const Tensor<T>& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].has_grad; }

  size_t num_nodes() const { return nodes_.size(); }

  int add_node(const char* op, Tensor<T> val, std::function<void(Graph&, int)> back) {
    if (check_finite && !val.all_finite())
      throw NumericError(strf("non-finite value produced by primitive '", op, "'"));
    nodes_.push_back(Node{std::move(val), Tensor<T>(), std::move(back), false});
    return int(nodes_.size()) - 1;
  }

  // Seeds dLoss/dLoss = 1 and replays the tape in reverse. Gradients of every
  // mounted parameter are accumulated into Parameter::grad (untouched
  // parameters keep their current, typically zero, gradient).
  void backward(Val<T> loss) {
    if (loss.g != this || loss.id < 0 || loss.id >= int(nodes_.size()))
      throw UsageError("backward: loss does not belong to this graph");
    if (nodes_[loss.id].val.numel() != 1)
      throw UsageError("backward: loss must be a scalar");
    if (backward_done_) throw UsageError("backward already run on this graph");
    backward_done_ = true;

    grad_mut(loss.id).data[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.has_grad || !n.back) continue;
      n.back(*this, id);
    }
    for (auto& [id, p] : bindings_) {
      if (!nodes_[id].has_grad) continue;
      const Tensor<T>& g = nodes_[id].grad;
      for (size_t i = 0; i < g.data.size(); ++i) p->grad.data[i] += g.data[i];
    }
  }

  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    std::function<void(Graph&, int)> back;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Parameter<T>*>> bindings_;
  std::unordered_map<const Parameter<T>*, int> param_nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Each returns a new node; backward closures address inputs by id
// so node-vector reallocation is harmless.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void check_same_graph(Val<T> a, Val<T> b) {
  if (a.g != b.g) throw UsageError("operands belong to different graphs");
}

template <typename T>
const Tensor<T>& V(Val<T> v) {
  return v.g->value(v.id);
}

}  // namespace detail

template <typename T>
Val<T> add(Val<T> a, Val<T> b) {
  detail::check_same_graph(a, b);
  const auto& A = detail::V(a);
  const auto& B = detail::V(b);
  if (!A.same_shape(B)) throw DimError("add: shape mismatch");
  Tensor<T> out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
  int id = a.g->add_node("add", std::move(out), [ai = a.id, bi = b.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    auto& gb = g.grad_mut(bi);
    for (size_t i = 0; i < go.data.size(); ++i) {
      ga.data[i] += go.data[i];
      gb.data[i] += go.data[i];
    }
  });
  return {a.g, id};
}

template <typename T>
Val<T> sub(Val<T> a, Val<T> b) {
  detail::check_same_graph(a, b);
  const auto& A = detail::V(a);
  const auto& B = detail::V(b);
  if (!A.same_shape(B)) throw DimError("sub: shape mismatch");
  Tensor<T> out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
  int id = a.g->add_node("sub", std::move(out), [ai = a.id, bi = b.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    auto& gb = g.grad_mut(bi);
    for (size_t i = 0; i < go.data.size(); ++i) {
      ga.data[i] += go.data[i];
      gb.data[i] -= go.data[i];
    }
  });
  return {a.g, id};
}

template <typename T>
Val<T> mul(Val<T> a, Val<T> b) {
  detail::check_same_graph(a, b);
  const auto& A = detail::V(a);
  const auto& B = detail::V(b);
  if (!A.same_shape(B)) throw DimError("mul: shape mismatch");
  Tensor<T> out = A;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
  int id = a.g->add_node("mul", std::move(out), [ai = a.id, bi = b.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    const auto& B2 = g.value(bi);
    auto& ga = g.grad_mut(ai);
    auto& gb = g.grad_mut(bi);
    for (size_t i = 0; i < go.data.size(); ++i) {
      ga.data[i] += go.data[i] * B2.data[i];
      gb.data[i] += go.data[i] * A2.data[i];
    }
  });
  return {a.g, id};
}

// k*x + m, elementwise with scalar constants
template <typename T>
Val<T> affine_const(Val<T> a, T k, T m) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = k * v + m;
  int id = a.g->add_node("affine_const", std::move(out), [ai = a.id, k](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += k * go.data[i];
  });
  return {a.g, id};
}

template <typename T>
Val<T> scale(Val<T> a, T k) {
  return affine_const(a, k, T(0));
}

// broadcast a 1-D vector [d] over the rows of [n x d]
template <typename T>
Val<T> add_rowvec(Val<T> a, Val<T> v) {
  detail::check_same_graph(a, v);
  const auto& A = detail::V(a);
  const auto& B = detail::V(v);
  if (A.cols() != int(B.data.size())) throw DimError("add_rowvec: width mismatch");
  Tensor<T> out = A;
  int n = A.rows(), d = A.cols();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data[size_t(i) * d + j] += B.data[j];
  int id = a.g->add_node("add_rowvec", std::move(out), [ai = a.id, vi = v.id, n, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    auto& gv = g.grad_mut(vi);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        ga.data[size_t(i) * d + j] += go.data[size_t(i) * d + j];
        gv.data[j] += go.data[size_t(i) * d + j];
      }
  });
  return {a.g, id};
}

template <typename T>
Val<T> mul_rowvec(Val<T> a, Val<T> v) {
  detail::check_same_graph(a, v);
  const auto& A = detail::V(a);
  const auto& B = detail::V(v);
  if (A.cols() != int(B.data.size())) throw DimError("mul_rowvec: width mismatch");
  Tensor<T> out = A;
  int n = A.rows(), d = A.cols();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data[size_t(i) * d + j] *= B.data[j];
  int id = a.g->add_node("mul_rowvec", std::move(out), [ai = a.id, vi = v.id, n, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    const auto& B2 = g.value(vi);
    auto& ga = g.grad_mut(ai);
    auto& gv = g.grad_mut(vi);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        ga.data[size_t(i) * d + j] += go.data[size_t(i) * d + j] * B2.data[j];
        gv.data[j] += go.data[size_t(i) * d + j] * A2.data[size_t(i) * d + j];
      }
  });
  return {a.g, id};
}

template <typename T>
Val<T> matmul(Val<T> a, Val<T> b) {
  detail::check_same_graph(a, b);
  const auto& A = detail::V(a);
  const auto& B = detail::V(b);
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0])
    throw DimError(strf("matmul: [", A.rows(), "x", A.cols(), "] * [", B.rows(), "x", B.cols(), "]"));
  int n = A.shape[0], k = A.shape[1], m = B.shape[1];
  Tensor<T> out({n, m});
  mm_nn(A.data.data(), B.data.data(), out.data.data(), n, k, m, false);
  int id = a.g->add_node("matmul", std::move(out), [ai = a.id, bi = b.id, n, k, m](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    const auto& B2 = g.value(bi);
    mm_nt(go.data.data(), B2.data.data(), g.grad_mut(ai).data.data(), n, m, k, true);
    mm_tn(A2.data.data(), go.data.data(), g.grad_mut(bi).data.data(), n, k, m, true);
  });
  return {a.g, id};
}

// a * b^T, used for attention scores
template <typename T>
Val<T> matmul_nt(Val<T> a, Val<T> b) {
  detail::check_same_graph(a, b);
  const auto& A = detail::V(a);
  const auto& B = detail::V(b);
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[1])
    throw DimError("matmul_nt: inner dimension mismatch");
  int n = A.shape[0], k = A.shape[1], m = B.shape[0];
  Tensor<T> out({n, m});
  mm_nt(A.data.data(), B.data.data(), out.data.data(), n, k, m, false);
  int id = a.g->add_node("matmul_nt", std::move(out), [ai = a.id, bi = b.id, n, k, m](Graph<T>& g, int self) {
    const auto& go = g.grad(self);   // [n x m]
    const auto& A2 = g.value(ai);    // [n x k]
    const auto& B2 = g.value(bi);    // [m x k]
    mm_nn(go.data.data(), B2.data.data(), g.grad_mut(ai).data.data(), n, m, k, true);
    mm_tn(go.data.data(), A2.data.data(), g.grad_mut(bi).data.data(), n, m, k, true);
  });
  return {a.g, id};
}

// y = x W + b; the FC block used everywhere
template <typename T>
Val<T> affine(Val<T> x, Parameter<T>& W, Parameter<T>& b) {
  Graph<T>& g = *x.g;
  const auto& X = detail::V(x);
  if (X.cols() != W.value.shape[0] || W.value.shape[1] != int(b.value.data.size()))
    throw DimError(strf("affine '", W.name, "': x[", X.rows(), "x", X.cols(), "] W[",
                        W.value.shape[0], "x", W.value.shape[1], "] b[", b.value.data.size(), "]"));
  return add_rowvec(matmul(x, g.param(W)), g.param(b));
}

template <typename T>
Val<T> relu(Val<T> a) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  int id = a.g->add_node("relu", std::move(out), [ai = a.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i)
      if (A2.data[i] > T(0)) ga.data[i] += go.data[i];
  });
  return {a.g, id};
}

template <typename T>
Val<T> sigmoid(Val<T> a) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
  int id = a.g->add_node("sigmoid", std::move(out), [ai = a.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& Y = g.value(self);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i)
      ga.data[i] += go.data[i] * Y.data[i] * (T(1) - Y.data[i]);
  });
  return {a.g, id};
}

template <typename T>
Val<T> log_elem(Val<T> a) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = std::log(v);
  int id = a.g->add_node("log", std::move(out), [ai = a.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i] / A2.data[i];
  });
  return {a.g, id};
}

// gradient is zero where the clamp binds
template <typename T>
Val<T> clamp(Val<T> a, T lo, T hi) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
  int id = a.g->add_node("clamp", std::move(out), [ai = a.id, lo, hi](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i)
      if (A2.data[i] > lo && A2.data[i] < hi) ga.data[i] += go.data[i];
  });
  return {a.g, id};
}

// x^p for x >= 0 with constant exponent
template <typename T>
Val<T> pow_const(Val<T> a, T p) {
  Tensor<T> out = detail::V(a);
  for (auto& v : out.data) v = std::pow(v, p);
  int id = a.g->add_node("pow_const", std::move(out), [ai = a.id, p](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& A2 = g.value(ai);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i) {
      T d = (p == T(0)) ? T(0) : p * std::pow(A2.data[i], p - T(1));
      ga.data[i] += go.data[i] * d;
    }
  });
  return {a.g, id};
}

// numerically stabilized softmax along the last axis of a 2-D tensor
template <typename T>
Val<T> softmax_rows(Val<T> a) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  Tensor<T> out = A;
  for (int i = 0; i < n; ++i) {
    T* r = out.data.data() + size_t(i) * d;
    T mx = r[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, r[j]);
    T sum = 0;
    for (int j = 0; j < d; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < d; ++j) r[j] /= sum;
  }
  int id = a.g->add_node("softmax", std::move(out), [ai = a.id, n, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& Y = g.value(self);
    auto& ga = g.grad_mut(ai);
    for (int i = 0; i < n; ++i) {
      const T* y = Y.data.data() + size_t(i) * d;
      const T* gy = go.data.data() + size_t(i) * d;
      T dot = 0;
      for (int j = 0; j < d; ++j) dot += gy[j] * y[j];
      T* gx = ga.data.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
  return {a.g, id};
}

// Softmax restricted to the valid entries of each row; invalid entries get
// exactly zero weight and zero gradient. A fully-masked row yields an all-zero
// row (padded frames must not inject signal).
template <typename T>
Val<T> masked_softmax_rows(Val<T> a, std::vector<uint8_t> valid) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  if (int(valid.size()) != n * d) throw DimError("masked_softmax: mask size mismatch");
  Tensor<T> out({n, d});
  for (int i = 0; i < n; ++i) {
    const T* x = A.data.data() + size_t(i) * d;
    const uint8_t* m = valid.data() + size_t(i) * d;
    T* r = out.data.data() + size_t(i) * d;
    T mx = -std::numeric_limits<T>::infinity();
    for (int j = 0; j < d; ++j)
      if (m[j]) mx = std::max(mx, x[j]);
    if (!std::isfinite(double(mx))) continue;  // fully masked -> zero row
    T sum = 0;
    for (int j = 0; j < d; ++j) {
      if (m[j]) {
        r[j] = std::exp(x[j] - mx);
        sum += r[j];
      }
    }
    for (int j = 0; j < d; ++j)
      if (m[j]) r[j] /= sum;
  }
  int id = a.g->add_node("masked_softmax", std::move(out),
                         [ai = a.id, n, d, mk = std::move(valid)](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    const auto& Y = g.value(self);
    auto& ga = g.grad_mut(ai);
    for (int i = 0; i < n; ++i) {
      const T* y = Y.data.data() + size_t(i) * d;
      const T* gy = go.data.data() + size_t(i) * d;
      const uint8_t* m = mk.data() + size_t(i) * d;
      T dot = 0;
      for (int j = 0; j < d; ++j)
        if (m[j]) dot += gy[j] * y[j];
      T* gx = ga.data.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j)
        if (m[j]) gx[j] += y[j] * (gy[j] - dot);
    }
  });
  return {a.g, id};
}

// Per-row layer normalization (population variance) with gain/bias. Constant
// rows normalize to zero, so zero-padded slots stay silent instead of NaN.
template <typename T>
Val<T> layer_norm_rows(Val<T> x, Parameter<T>& gain, Parameter<T>& bias, T eps = T(1e-5)) {
  Graph<T>& g = *x.g;
  Val<T> gv = g.param(gain);
  Val<T> bv = g.param(bias);
  const auto& X = detail::V(x);
  int n = X.rows(), d = X.cols();
  if (int(gain.value.data.size()) != d || int(bias.value.data.size()) != d)
    throw DimError("layer_norm: gain/bias width mismatch");

  Tensor<T> out({n, d});
  std::vector<T> inv_sd(n);
  for (int i = 0; i < n; ++i) {
    const T* r = X.data.data() + size_t(i) * d;
    T mu = 0;
    for (int j = 0; j < d; ++j) mu += r[j];
    mu /= T(d);
    T var = 0;
    for (int j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= T(d);
    T s = T(1) / std::sqrt(var + eps);
    inv_sd[i] = s;
    T* o = out.data.data() + size_t(i) * d;
    const T* gn = detail::V(gv).data.data();
    const T* bs = detail::V(bv).data.data();
    for (int j = 0; j < d; ++j) o[j] = (r[j] - mu) * s * gn[j] + bs[j];
  }
  int id = g.add_node("layer_norm", std::move(out),
                      [xi = x.id, gi = gv.id, bi = bv.id, n, d, inv = std::move(inv_sd)](Graph<T>& g2, int self) {
    const auto& go = g2.grad(self);
    const auto& X2 = g2.value(xi);
    const auto& GN = g2.value(gi);
    auto& gx = g2.grad_mut(xi);
    auto& gg = g2.grad_mut(gi);
    auto& gb = g2.grad_mut(bi);
    for (int i = 0; i < n; ++i) {
      const T* r = X2.data.data() + size_t(i) * d;
      const T* gy = go.data.data() + size_t(i) * d;
      T s = inv[i];
      T mu = 0;
      for (int j = 0; j < d; ++j) mu += r[j];
      mu /= T(d);
      // xhat, gl = gy .* gain, and the two row means the gradient needs
      T mean_gl = 0, mean_glx = 0;
      for (int j = 0; j < d; ++j) {
        T xh = (r[j] - mu) * s;
        T gl = gy[j] * GN.data[j];
        mean_gl += gl;
        mean_glx += gl * xh;
        gg.data[j] += gy[j] * xh;
        gb.data[j] += gy[j];
      }
      mean_gl /= T(d);
      mean_glx /= T(d);
      T* gxr = gx.data.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) {
        T xh = (r[j] - mu) * s;
        T gl = gy[j] * GN.data[j];
        gxr[j] += s * (gl - mean_gl - xh * mean_glx);
      }
    }
  });
  return {&g, id};
}

template <typename T>
Val<T> concat_rows(const std::vector<Val<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: empty input");
  Graph<T>& g = *parts[0].g;
  int d = detail::V(parts[0]).cols();
  int n = 0;
  for (auto p : parts) {
    if (detail::V(p).cols() != d) throw DimError("concat_rows: width mismatch");
    n += detail::V(p).rows();
  }
  Tensor<T> out({n, d});
  int row = 0;
  std::vector<std::pair<int, int>> spans;  // (id, rows)
  for (auto p : parts) {
    const auto& P = detail::V(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + size_t(row) * d);
    spans.push_back({p.id, P.rows()});
    row += P.rows();
  }
  int id = g.add_node("concat_rows", std::move(out), [spans, d](Graph<T>& g2, int self) {
    const auto& go = g2.grad(self);
    int r0 = 0;
    for (auto [pid, rows] : spans) {
      auto& gp = g2.grad_mut(pid);
      for (int i = 0; i < rows * d; ++i) gp.data[i] += go.data[size_t(r0) * d + i];
      r0 += rows;
    }
  });
  return {&g, id};
}

template <typename T>
Val<T> concat_cols(const std::vector<Val<T>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: empty input");
  Graph<T>& g = *parts[0].g;
  int n = detail::V(parts[0]).rows();
  int d = 0;
  for (auto p : parts) {
    if (detail::V(p).rows() != n) throw DimError("concat_cols: row mismatch");
    d += detail::V(p).cols();
  }
  Tensor<T> out({n, d});
  std::vector<std::tuple<int, int, int>> spans;  // (id, col offset, cols)
  int c0 = 0;
  for (auto p : parts) {
    const auto& P = detail::V(p);
    int pc = P.cols();
    for (int i = 0; i < n; ++i)
      std::copy(P.data.begin() + size_t(i) * pc, P.data.begin() + size_t(i + 1) * pc,
                out.data.begin() + size_t(i) * d + c0);
    spans.push_back({p.id, c0, pc});
    c0 += pc;
  }
  int id = g.add_node("concat_cols", std::move(out), [spans, n, d](Graph<T>& g2, int self) {
    const auto& go = g2.grad(self);
    for (auto [pid, off, pc] : spans) {
      auto& gp = g2.grad_mut(pid);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < pc; ++j) gp.data[size_t(i) * pc + j] += go.data[size_t(i) * d + off + j];
    }
  });
  return {&g, id};
}

template <typename T>
Val<T> slice_rows(Val<T> a, int r0, int count) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  if (r0 < 0 || count <= 0 || r0 + count > n) throw DimError("slice_rows: range out of bounds");
  Tensor<T> out({count, d});
  std::copy(A.data.begin() + size_t(r0) * d, A.data.begin() + size_t(r0 + count) * d, out.data.begin());
  int id = a.g->add_node("slice_rows", std::move(out), [ai = a.id, r0, count, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (int i = 0; i < count * d; ++i) ga.data[size_t(r0) * d + i] += go.data[i];
  });
  return {a.g, id};
}

template <typename T>
Val<T> slice_cols(Val<T> a, int c0, int count) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  if (c0 < 0 || count <= 0 || c0 + count > d) throw DimError("slice_cols: range out of bounds");
  Tensor<T> out({n, count});
  for (int i = 0; i < n; ++i)
    std::copy(A.data.begin() + size_t(i) * d + c0, A.data.begin() + size_t(i) * d + c0 + count,
              out.data.begin() + size_t(i) * count);
  int id = a.g->add_node("slice_cols", std::move(out), [ai = a.id, c0, count, n, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < count; ++j) ga.data[size_t(i) * d + c0 + j] += go.data[size_t(i) * count + j];
  });
  return {a.g, id};
}

// rows may repeat; gradient scatter-adds
template <typename T>
Val<T> gather_rows(Val<T> a, std::vector<int> idx) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  for (int i : idx)
    if (i < 0 || i >= n) throw DimError("gather_rows: index out of range");
  Tensor<T> out({int(idx.size()), d});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy(A.data.begin() + size_t(idx[i]) * d, A.data.begin() + size_t(idx[i] + 1) * d,
              out.data.begin() + i * d);
  int id = a.g->add_node("gather_rows", std::move(out),
                         [ai = a.id, ix = std::move(idx), d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < ix.size(); ++i)
      for (int j = 0; j < d; ++j) ga.data[size_t(ix[i]) * d + j] += go.data[i * d + j];
  });
  return {a.g, id};
}

// [n x d] -> [1 x d]
template <typename T>
Val<T> mean_rows(Val<T> a) {
  const auto& A = detail::V(a);
  int n = A.rows(), d = A.cols();
  Tensor<T> out({1, d});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data[j] += A.data[size_t(i) * d + j];
  for (int j = 0; j < d; ++j) out.data[j] /= T(n);
  int id = a.g->add_node("mean_rows", std::move(out), [ai = a.id, n, d](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) ga.data[size_t(i) * d + j] += go.data[j] / T(n);
  });
  return {a.g, id};
}

template <typename T>
Val<T> sum_all(Val<T> a) {
  const auto& A = detail::V(a);
  T s = 0;
  for (T v : A.data) s += v;
  Tensor<T> out({1});
  out.data[0] = s;
  int id = a.g->add_node("sum_all", std::move(out), [ai = a.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (auto& v : ga.data) v += go.data[0];
  });
  return {a.g, id};
}

template <typename T>
Val<T> mean_all(Val<T> a) {
  int64_t n = detail::V(a).numel();
  return scale(sum_all(a), T(1) / T(n));
}

template <typename T>
Val<T> reshape(Val<T> a, std::vector<int> shape) {
  const auto& A = detail::V(a);
  if (Tensor<T>::numel_of(shape) != A.numel()) throw DimError("reshape: element count mismatch");
  Tensor<T> out(std::move(shape), A.data);
  int id = a.g->add_node("reshape", std::move(out), [ai = a.id](Graph<T>& g, int self) {
    const auto& go = g.grad(self);
    auto& ga = g.grad_mut(ai);
    for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i];
  });
  return {a.g, id};
}

// ---------------------------------------------------------------------------
// Scaled dot-product attention and the multi-head wrapper. Residual paths are
// added by the caller.
// ---------------------------------------------------------------------------

template <typename T>
struct AttentionOut {
  Val<T> out;
  Val<T> weights;
};

// weights = softmax(Q K^T / sqrt(D)); masked entries get zero weight; a fully
// masked query row yields a zero output row.
template <typename T>
AttentionOut<T> attention(Val<T> q, Val<T> k, Val<T> v, const std::vector<uint8_t>* mask = nullptr) {
  const auto& Q = detail::V(q);
  const auto& K = detail::V(k);
  const auto& Vv = detail::V(v);
  if (Q.cols() != K.cols()) throw DimError("attention: Q/K feature dims differ");
  if (K.rows() != Vv.rows()) throw DimError("attention: K/V token counts differ");
  int D = Q.cols();
  Val<T> scores = scale(matmul_nt(q, k), T(1) / std::sqrt(T(D)));
  Val<T> w = mask ? masked_softmax_rows(scores, *mask) : softmax_rows(scores);
  return {matmul(w, v), w};
}

// K projections carry no bias: a shared key offset shifts every score in a
// row equally, which softmax cancels.
template <typename T>
struct MhaParams {
  Parameter<T>*Wq, *bq, *Wk, *Wv, *bv, *Wo, *bo;
  int heads = 1;
};

template <typename T>
MhaParams<T> make_mha_params(ParamSet<T>& ps, const std::string& prefix, int d_model, int heads,
                             Rng& rng);

// Cross- or self-attention over 2-D token matrices; q_in [n x d], kv_in [m x d].
// mask, when given, is an [n x m] key-validity table.
template <typename T>
Val<T> multi_head_attention(Val<T> q_in, Val<T> kv_in, const MhaParams<T>& p,
                            const std::vector<uint8_t>* mask = nullptr) {
  const auto& Q = detail::V(q_in);
  int d = Q.cols();
  if (d % p.heads != 0)
    throw ConfigError(strf("multi_head_attention: model dim ", d, " not divisible by ", p.heads, " heads"));
  int dh = d / p.heads;
  Graph<T>& g = *q_in.g;
  Val<T> q = affine(q_in, *p.Wq, *p.bq);
  Val<T> k = matmul(kv_in, g.param(*p.Wk));
  Val<T> v = affine(kv_in, *p.Wv, *p.bv);
  std::vector<Val<T>> heads_out;
  heads_out.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Val<T> qs = slice_cols(q, h * dh, dh);
    Val<T> ks = slice_cols(k, h * dh, dh);
    Val<T> vs = slice_cols(v, h * dh, dh);
    heads_out.push_back(attention(qs, ks, vs, mask).out);
  }
  Val<T> cat = p.heads == 1 ? heads_out[0] : concat_cols(heads_out);
  return affine(cat, *p.Wo, *p.bo);
}

// ---------------------------------------------------------------------------
// Parameter initialization: uniform(-1/sqrt(d_in), +1/sqrt(d_in)) for weight
// matrices, zeros for biases, ones for layer-norm gains.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> init_uniform(std::vector<int> shape, int d_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  double bound = 1.0 / std::sqrt(double(d_in));
  for (auto& v : t.data) v = T(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Parameter<T>& add_weight(ParamSet<T>& ps, const std::string& name, int d_in, int d_out, Rng& rng) {
  return ps.add(name, init_uniform<T>({d_in, d_out}, d_in, rng));
}

template <typename T>
Parameter<T>& add_bias(ParamSet<T>& ps, const std::string& name, int d) {
  return ps.add(name, Tensor<T>::zeros({d}));
}

template <typename T>
struct LayerNormParams {
  Parameter<T>*gain, *bias;
};

template <typename T>
LayerNormParams<T> make_layer_norm(ParamSet<T>& ps, const std::string& prefix, int d) {
  return {&ps.add(prefix + ".gain", Tensor<T>::full({d}, T(1))), &ps.add(prefix + ".bias", Tensor<T>::zeros({d}))};
}

template <typename T>
MhaParams<T> make_mha_params(ParamSet<T>& ps, const std::string& prefix, int d_model, int heads, Rng& rng) {
  MhaParams<T> p;
  p.heads = heads;
  p.Wq = &add_weight(ps, prefix + ".q.W", d_model, d_model, rng);
  p.bq = &add_bias(ps, prefix + ".q.b", d_model);
  p.Wk = &add_weight(ps, prefix + ".k.W", d_model, d_model, rng);
  p.Wv = &add_weight(ps, prefix + ".v.W", d_model, d_model, rng);
  p.bv = &add_bias(ps, prefix + ".v.b", d_model);
  p.Wo = &add_weight(ps, prefix + ".o.W", d_model, d_model, rng);
  p.bo = &add_bias(ps, prefix + ".o.b", d_model);
  return p;
}

}  // namespace peohoi
