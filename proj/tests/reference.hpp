#pragma once

// Independent reference implementations used as test oracles. Everything
// here is deliberately written as plain nested loops over scalars so it
// shares no arithmetic path with the im2col/GEMM production kernels.

#include <complex>
#include <cstdint>
#include <vector>

#include "cxnn/complex_tensor.hpp"
#include "cxnn/conv.hpp"
#include "cxnn/tensor.hpp"

namespace reference {

using cxnn::ComplexTensor;
using cxnn::Conv2dSpec;
using cxnn::Shape;
using cxnn::Tensor;

// Direct quadruple-loop real cross-correlation.
template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                       const Conv2dSpec& s) {
  const int64_t b = x.shape().dim(0), c = x.shape().dim(1);
  const int64_t h = x.shape().dim(2), ww = x.shape().dim(3);
  const int64_t oc = w.shape().dim(0);
  const int64_t oh = s.out_extent(h, s.kh), ow = s.out_extent(ww, s.kw);
  Tensor<T> y(Shape{b, oc, oh, ow});
  for (int64_t n = 0; n < b; ++n)
    for (int64_t co = 0; co < oc; ++co)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          T acc = bias ? (*bias)[co] : T(0);
          for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t di = 0; di < s.kh; ++di)
              for (int64_t dj = 0; dj < s.kw; ++dj) {
                const int64_t yy = i * s.stride - s.padding + di * s.dilation;
                const int64_t xx = j * s.stride - s.padding + dj * s.dilation;
                if (yy < 0 || yy >= h || xx < 0 || xx >= ww) continue;
                acc += x.at({n, ci, yy, xx}) * w.at({co, ci, di, dj});
              }
          y.at({n, co, i, j}) = acc;
        }
  return y;
}

// Scalar complex-arithmetic loop oracle for the complex convolution.
template <typename T>
ComplexTensor<T> conv2d_complex_naive(const ComplexTensor<T>& x, const ComplexTensor<T>& w,
                                      const ComplexTensor<T>* bias, const Conv2dSpec& s) {
  const int64_t b = x.shape().dim(0), c = x.shape().dim(1);
  const int64_t h = x.shape().dim(2), ww = x.shape().dim(3);
  const int64_t oc = w.shape().dim(0);
  const int64_t oh = s.out_extent(h, s.kh), ow = s.out_extent(ww, s.kw);
  ComplexTensor<T> y(Shape{b, oc, oh, ow});
  for (int64_t n = 0; n < b; ++n)
    for (int64_t co = 0; co < oc; ++co)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          std::complex<T> acc =
              bias ? std::complex<T>(bias->re[co], bias->im[co]) : std::complex<T>(0, 0);
          for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t di = 0; di < s.kh; ++di)
              for (int64_t dj = 0; dj < s.kw; ++dj) {
                const int64_t yy = i * s.stride - s.padding + di * s.dilation;
                const int64_t xx = j * s.stride - s.padding + dj * s.dilation;
                if (yy < 0 || yy >= h || xx < 0 || xx >= ww) continue;
                acc += std::complex<T>(x.re.at({n, ci, yy, xx}), x.im.at({n, ci, yy, xx})) *
                       std::complex<T>(w.re.at({co, ci, di, dj}), w.im.at({co, ci, di, dj}));
              }
          y.re.at({n, co, i, j}) = acc.real();
          y.im.at({n, co, i, j}) = acc.imag();
        }
  return y;
}

// Builds the real block-matrix operands of the matrix-notation identity:
// weights [[w_r, -w_i], [w_i, w_r]] applied to the stacked input
// [x_r; x_i]. Running any real convolution on these yields [s_r; s_i].
template <typename T>
Tensor<T> block_matrix_weights(const ComplexTensor<T>& w) {
  const int64_t oc = w.shape().dim(0), c = w.shape().dim(1);
  const int64_t kh = w.shape().dim(2), kw = w.shape().dim(3);
  Tensor<T> out(Shape{2 * oc, 2 * c, kh, kw});
  for (int64_t co = 0; co < oc; ++co)
    for (int64_t ci = 0; ci < c; ++ci)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          const T re = w.re.at({co, ci, i, j});
          const T im = w.im.at({co, ci, i, j});
          out.at({co, ci, i, j}) = re;
          out.at({co, c + ci, i, j}) = -im;
          out.at({oc + co, ci, i, j}) = im;
          out.at({oc + co, c + ci, i, j}) = re;
        }
  return out;
}

template <typename T>
Tensor<T> stack_planes(const ComplexTensor<T>& x) {
  const int64_t b = x.shape().dim(0), c = x.shape().dim(1);
  const int64_t h = x.shape().dim(2), w = x.shape().dim(3);
  Tensor<T> out(Shape{b, 2 * c, h, w});
  const int64_t plane = c * h * w;
  for (int64_t n = 0; n < b; ++n) {
    for (int64_t i = 0; i < plane; ++i) {
      out[n * 2 * plane + i] = x.re[n * plane + i];
      out[n * 2 * plane + plane + i] = x.im[n * plane + i];
    }
  }
  return out;
}

template <typename T>
Tensor<T> stack_bias(const ComplexTensor<T>& b) {
  const int64_t n = b.size();
  Tensor<T> out(Shape{2 * n});
  for (int64_t i = 0; i < n; ++i) {
    out[i] = b.re[i];
    out[n + i] = b.im[i];
  }
  return out;
}

// Brute-force confusion-matrix classification metrics.
struct ConfusionMetrics {
  double accuracy;
  double macro_f1;
};

inline ConfusionMetrics confusion_metrics(const std::vector<int>& pred,
                                          const std::vector<int>& truth, int k) {
  std::vector<std::vector<int64_t>> cm(static_cast<size_t>(k),
                                       std::vector<int64_t>(static_cast<size_t>(k), 0));
  for (size_t i = 0; i < pred.size(); ++i)
    cm[static_cast<size_t>(truth[i])][static_cast<size_t>(pred[i])]++;
  int64_t correct = 0;
  for (int c = 0; c < k; ++c) correct += cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
  double f1_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    int64_t tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
    int64_t fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm[static_cast<size_t>(o)][static_cast<size_t>(c)];
      fn += cm[static_cast<size_t>(c)][static_cast<size_t>(o)];
    }
    const double p_den = static_cast<double>(tp + fp);
    const double r_den = static_cast<double>(tp + fn);
    if (p_den == 0.0 && r_den == 0.0) continue;  // class absent -> F1 contribution 0
    const double prec = p_den > 0 ? static_cast<double>(tp) / p_den : 0.0;
    const double rec = r_den > 0 ? static_cast<double>(tp) / r_den : 0.0;
    f1_sum += (prec + rec) > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return {static_cast<double>(correct) / static_cast<double>(pred.size()),
          f1_sum / static_cast<double>(k)};
}

// Set-arithmetic Dice/IoU oracle over boolean masks.
struct MaskMetrics {
  double dice;
  double iou;
};

inline MaskMetrics mask_metrics(const std::vector<bool>& a, const std::vector<bool>& b) {
  int64_t inter = 0, na = 0, nb = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
    na += a[i];
    nb += b[i];
  }
  if (na + nb == 0) return {1.0, 1.0};
  return {2.0 * static_cast<double>(inter) / static_cast<double>(na + nb),
          uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0};
}

// Scalar Adam, transcribed from the published update rule.
class ScalarAdam {
 public:
  ScalarAdam(double lr, size_t n) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& w, const std::vector<double>& g) {
    ++t_;
    for (size_t i = 0; i < w.size(); ++i) {
      m_[i] = 0.9 * m_[i] + 0.1 * g[i];
      v_[i] = 0.999 * v_[i] + 0.001 * g[i] * g[i];
      const double mhat = m_[i] / (1.0 - std::pow(0.9, t_));
      const double vhat = v_[i] / (1.0 - std::pow(0.999, t_));
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + 1e-8);
    }
  }

 private:
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace reference
