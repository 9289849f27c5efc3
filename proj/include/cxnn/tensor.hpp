#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cxnn/error.hpp"
#include "cxnn/shape.hpp"

namespace cxnn {

// Dense row-major real tensor. T is float in training builds and double
// in the verification path; both instantiations are always available.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.size()), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }

  const Shape& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Checked multi-index access, mainly for tests and reference paths.
  T& at(std::initializer_list<int64_t> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<int64_t> idx) const { return data_[offset(idx)]; }

  // Returns a copy with a new shape; element count must match.
  Tensor reshaped(Shape s) const {
    if (s.size() != size())
      throw ShapeError("reshape " + shape_.str() + " -> " + s.str() + " changes element count");
    Tensor out = *this;
    out.shape_ = std::move(s);
    return out;
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  size_t offset(std::initializer_list<int64_t> idx) const {
    if (static_cast<int>(idx.size()) != shape_.ndim())
      throw ShapeError("index rank mismatch for shape " + shape_.str());
    int64_t off = 0;
    int i = 0;
    for (int64_t v : idx) {
      int64_t d = shape_.dim(i);
      if (v < 0 || v >= d) throw ShapeError("index out of range for shape " + shape_.str());
      off = off * d + v;
      ++i;
    }
    return static_cast<size_t>(off);
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
T sum(const Tensor<T>& a) {
  T acc = T(0);
  for (int64_t i = 0; i < a.size(); ++i) acc += a[i];
  return acc;
}

template <typename T>
using EigenRowMajor =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 2-D matrix product, backed by Eigen over the raw row-major buffers.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().ndim() != 2 || b.shape().ndim() != 2)
    throw ShapeError("matmul expects rank-2 tensors, got " + a.shape().str() + " and " +
                     b.shape().str());
  const int64_t m = a.shape().dim(0), k = a.shape().dim(1);
  const int64_t k2 = b.shape().dim(0), n = b.shape().dim(1);
  if (k != k2)
    throw ShapeError("matmul inner dimension mismatch: " + a.shape().str() + " x " +
                     b.shape().str());
  Tensor<T> out(Shape{m, n});
  Eigen::Map<const EigenRowMajor<T>> ma(a.data(), m, k);
  Eigen::Map<const EigenRowMajor<T>> mb(b.data(), k, n);
  Eigen::Map<EigenRowMajor<T>> mo(out.data(), m, n);
  mo.noalias() = ma * mb;
  return out;
}

// C += A   * B    (raw-pointer GEMM helpers used by the conv kernels)
// C += A^T * B / A * B^T variants, all row-major.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n,
              bool trans_a = false, bool trans_b = false) {
  Eigen::Map<EigenRowMajor<T>> mc(c, m, n);
  if (!trans_a && !trans_b) {
    Eigen::Map<const EigenRowMajor<T>> ma(a, m, k);
    Eigen::Map<const EigenRowMajor<T>> mb(b, k, n);
    mc.noalias() += ma * mb;
  } else if (trans_a && !trans_b) {
    Eigen::Map<const EigenRowMajor<T>> ma(a, k, m);
    Eigen::Map<const EigenRowMajor<T>> mb(b, k, n);
    mc.noalias() += ma.transpose() * mb;
  } else if (!trans_a && trans_b) {
    Eigen::Map<const EigenRowMajor<T>> ma(a, m, k);
    Eigen::Map<const EigenRowMajor<T>> mb(b, n, k);
    mc.noalias() += ma * mb.transpose();
  } else {
    Eigen::Map<const EigenRowMajor<T>> ma(a, k, m);
    Eigen::Map<const EigenRowMajor<T>> mb(b, n, k);
    mc.noalias() += ma.transpose() * mb.transpose();
  }
}

}  // namespace cxnn
