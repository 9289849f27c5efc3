#pragma once

#include <cmath>
#include <utility>

#include "cxnn/tensor.hpp"

namespace cxnn {

// Planar complex tensor: the full real plane followed by the full
// imaginary plane, each a plain real tensor of identical shape. The
// planar layout is what lets the block-matrix convolution oracle and the
// four-real-convolution kernel operate on ordinary real buffers.
template <typename T>
struct ComplexTensor {
  Tensor<T> re;
  Tensor<T> im;

  ComplexTensor() = default;
  ComplexTensor(Tensor<T> r, Tensor<T> i) : re(std::move(r)), im(std::move(i)) {
    check_same_shape(re, im, "complex tensor planes");
  }
  explicit ComplexTensor(const Shape& shape) : re(shape), im(shape) {}

  const Shape& shape() const { return re.shape(); }
  int64_t size() const { return re.size(); }
};

// Lifts a real tensor to complex with zero imaginary plane. This is the
// convention for feeding magnitude-only images into complex models.
template <typename T>
ComplexTensor<T> complex_from_real(const Tensor<T>& x) {
  return ComplexTensor<T>(x, Tensor<T>::zeros(x.shape()));
}

template <typename T>
ComplexTensor<T> cadd(const ComplexTensor<T>& a, const ComplexTensor<T>& b) {
  return ComplexTensor<T>(add(a.re, b.re), add(a.im, b.im));
}

template <typename T>
ComplexTensor<T> csub(const ComplexTensor<T>& a, const ComplexTensor<T>& b) {
  return ComplexTensor<T>(sub(a.re, b.re), sub(a.im, b.im));
}

// Elementwise complex product: (a_r b_r - a_i b_i) + i (a_i b_r + a_r b_i).
template <typename T>
ComplexTensor<T> cmul(const ComplexTensor<T>& a, const ComplexTensor<T>& b) {
  check_same_shape(a.re, b.re, "cmul");
  ComplexTensor<T> out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) {
    out.re[i] = a.re[i] * b.re[i] - a.im[i] * b.im[i];
    out.im[i] = a.im[i] * b.re[i] + a.re[i] * b.im[i];
  }
  return out;
}

template <typename T>
Tensor<T> magnitude(const ComplexTensor<T>& x) {
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i)
    out[i] = std::sqrt(x.re[i] * x.re[i] + x.im[i] * x.im[i]);
  return out;
}

}  // namespace cxnn
