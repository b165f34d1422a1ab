#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "peohoi/common.hpp"

namespace peohoi {

// Dense row-major tensor. Rank is dynamic but in practice everything here is
// a vector [d] or a matrix [n x d].
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), T(0));
  }
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (int64_t(data.size()) != numel_of(shape))
      throw DimError("tensor data length does not match shape");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int x : s) {
      if (x <= 0) throw DimError("tensor dimensions must be positive");
      n *= x;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  static Tensor full(std::vector<int> s, T v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  // row-major matrix from nested initializer list, for tests and toy setups
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    int n = int(rows.size());
    int m = n ? int(rows.begin()->size()) : 0;
    Tensor t({n, m});
    int i = 0;
    for (const auto& r : rows) {
      if (int(r.size()) != m) throw DimError("ragged matrix literal");
      for (T v : r) t.data[i++] = v;
    }
    return t;
  }

  static Tensor vec(std::initializer_list<T> vals) {
    Tensor t({int(vals.size())});
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
  }

  int64_t numel() const { return int64_t(data.size()); }
  int rank() const { return int(shape.size()); }

  int rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? 1 : throw_not2d()); }
  int cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : throw_not2d()); }

  T& at(int r, int c) { return data[size_t(r) * cols() + c]; }
  const T& at(int r, int c) const { return data[size_t(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }

 private:
  [[noreturn]] static int throw_not2d() { throw DimError("expected a 1-D or 2-D tensor"); }
};

// ---------------------------------------------------------------------------
// Raw matmul kernels (ikj order, accumulate variants). These are the only hot
// loops in the project.
// ---------------------------------------------------------------------------

// C[n x m] (+)= A[n x k] * B[k x m]
template <typename T>
void mm_nn(const T* A, const T* B, T* C, int n, int k, int m, bool accumulate) {
  if (!accumulate) std::fill(C, C + int64_t(n) * m, T(0));
  for (int i = 0; i < n; ++i) {
    const T* a = A + int64_t(i) * k;
    T* c = C + int64_t(i) * m;
    for (int p = 0; p < k; ++p) {
      T av = a[p];
      if (av == T(0)) continue;
      const T* b = B + int64_t(p) * m;
      for (int j = 0; j < m; ++j) c[j] += av * b[j];
    }
  }
}

// C[n x m] (+)= A[n x k] * B[m x k]^T
template <typename T>
void mm_nt(const T* A, const T* B, T* C, int n, int k, int m, bool accumulate) {
  for (int i = 0; i < n; ++i) {
    const T* a = A + int64_t(i) * k;
    T* c = C + int64_t(i) * m;
    for (int j = 0; j < m; ++j) {
      const T* b = B + int64_t(j) * k;
      T s = 0;
      for (int p = 0; p < k; ++p) s += a[p] * b[p];
      c[j] = accumulate ? c[j] + s : s;
    }
  }
}

// C[k x m] (+)= A[n x k]^T * G[n x m]
template <typename T>
void mm_tn(const T* A, const T* G, T* C, int n, int k, int m, bool accumulate) {
  if (!accumulate) std::fill(C, C + int64_t(k) * m, T(0));
  for (int i = 0; i < n; ++i) {
    const T* a = A + int64_t(i) * k;
    const T* g = G + int64_t(i) * m;
    for (int p = 0; p < k; ++p) {
      T av = a[p];
      if (av == T(0)) continue;
      T* c = C + int64_t(p) * m;
      for (int j = 0; j < m; ++j) c[j] += av * g[j];
    }
  }
}

}  // namespace peohoi
