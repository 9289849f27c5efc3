#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cxnn/autodiff.hpp"
#include "cxnn/tensor.hpp"

// Differentiable tensor primitives recorded on a Tape. Each op computes
// the forward value eagerly and appends one backward closure.

namespace cxnn::ops {

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  check_same_shape(tape.value(a), tape.value(b), "add");
  Var out = tape.alloc(cxnn::add(tape.value(a), tape.value(b)),
                       tape.needs_grad(a) || tape.needs_grad(b));
  tape.record([a, b, out](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  check_same_shape(tape.value(a), tape.value(b), "sub");
  Var out = tape.alloc(cxnn::sub(tape.value(a), tape.value(b)),
                       tape.needs_grad(a) || tape.needs_grad(b));
  tape.record([a, b, out](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  check_same_shape(tape.value(a), tape.value(b), "mul");
  Var out = tape.alloc(cxnn::mul(tape.value(a), tape.value(b)),
                       tape.needs_grad(a) || tape.needs_grad(b));
  tape.record([a, b, out](Tape<T>& t) {
    const auto& g = t.grad(out);
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
  return out;
}

template <typename T>
Var neg(Tape<T>& tape, Var a) {
  Var out = tape.alloc(cxnn::scale(tape.value(a), T(-1)), tape.needs_grad(a));
  tape.record([a, out](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.grad(out);
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
  });
  return out;
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T s) {
  Var out = tape.alloc(cxnn::scale(tape.value(a), s), tape.needs_grad(a));
  tape.record([a, out, s](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.grad(out);
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
  return out;
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  Tensor<T> s(Shape{1});
  s[0] = cxnn::sum(tape.value(a));
  Var out = tape.alloc(std::move(s), tape.needs_grad(a));
  tape.record([a, out](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const T g = t.grad(out)[0];
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

template <typename T>
Var relu(Tape<T>& tape, Var a) {
  const auto& v = tape.value(a);
  Tensor<T> y(v.shape());
  for (int64_t i = 0; i < v.size(); ++i) y[i] = v[i] > T(0) ? v[i] : T(0);
  Var out = tape.alloc(std::move(y), tape.needs_grad(a));
  tape.record([a, out](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.grad(out);
    const auto& v = t.value(a);
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i)
      if (v[i] > T(0)) ga[i] += g[i];
  });
  return out;
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var a) {
  const auto& v = tape.value(a);
  Tensor<T> y(v.shape());
  for (int64_t i = 0; i < v.size(); ++i) {
    // Split by sign for numerical stability.
    const T x = v[i];
    y[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                     : std::exp(x) / (T(1) + std::exp(x));
  }
  Var out = tape.alloc(std::move(y), tape.needs_grad(a));
  tape.record([a, out](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.grad(out);
    const auto& s = t.value(out);
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (T(1) - s[i]);
  });
  return out;
}

// Elementwise magnitude of a complex pair: sqrt(re^2 + im^2). The
// subgradient at the origin is taken as zero.
template <typename T>
Var complex_magnitude(Tape<T>& tape, Var re, Var im) {
  check_same_shape(tape.value(re), tape.value(im), "complex_magnitude");
  const auto& vr = tape.value(re);
  const auto& vi = tape.value(im);
  Tensor<T> y(vr.shape());
  for (int64_t i = 0; i < vr.size(); ++i)
    y[i] = std::sqrt(vr[i] * vr[i] + vi[i] * vi[i]);
  Var out = tape.alloc(std::move(y), tape.needs_grad(re) || tape.needs_grad(im));
  tape.record([re, im, out](Tape<T>& t) {
    const auto& g = t.grad(out);
    const auto& m = t.value(out);
    const auto& vr = t.value(re);
    const auto& vi = t.value(im);
    if (t.needs_grad(re)) {
      auto& gr = t.grad(re);
      for (int64_t i = 0; i < g.size(); ++i)
        if (m[i] > T(0)) gr[i] += g[i] * vr[i] / m[i];
    }
    if (t.needs_grad(im)) {
      auto& gi = t.grad(im);
      for (int64_t i = 0; i < g.size(); ++i)
        if (m[i] > T(0)) gi[i] += g[i] * vi[i] / m[i];
    }
  });
  return out;
}

template <typename T>
Var reshape(Tape<T>& tape, Var a, Shape s) {
  Var out = tape.alloc(tape.value(a).reshaped(s), tape.needs_grad(a));
  tape.record([a, out](Tape<T>& t) {
    if (!t.needs_grad(a)) return;
    const auto& g = t.grad(out);
    auto& ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

// Affine map y = x W^T + b with x [B, in], W [out, in], b [out].
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b) {
  const auto& vx = tape.value(x);
  const auto& vw = tape.value(w);
  if (vx.shape().ndim() != 2 || vw.shape().ndim() != 2)
    throw ShapeError("linear expects rank-2 input and weight");
  const int64_t batch = vx.shape().dim(0), in = vx.shape().dim(1);
  const int64_t out_f = vw.shape().dim(0);
  if (vw.shape().dim(1) != in)
    throw ShapeError("linear: input features " + std::to_string(in) + " vs weight " +
                     vw.shape().str());
  Tensor<T> y(Shape{batch, out_f});
  gemm_acc(vx.data(), vw.data(), y.data(), batch, in, out_f, false, true);
  if (b.valid()) {
    const auto& vb = tape.value(b);
    if (vb.size() != out_f) throw ShapeError("linear: bias size mismatch");
    for (int64_t i = 0; i < batch; ++i)
      for (int64_t j = 0; j < out_f; ++j) y[i * out_f + j] += vb[j];
  }
  bool ng = tape.needs_grad(x) || tape.needs_grad(w) || (b.valid() && tape.needs_grad(b));
  Var out = tape.alloc(std::move(y), ng);
  tape.record([x, w, b, out, batch, in, out_f](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(x))
      gemm_acc(g.data(), t.value(w).data(), t.grad(x).data(), batch, out_f, in, false, false);
    if (t.needs_grad(w))
      gemm_acc(g.data(), t.value(x).data(), t.grad(w).data(), out_f, batch, in, true, false);
    if (b.valid() && t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t i = 0; i < batch; ++i)
        for (int64_t j = 0; j < out_f; ++j) gb[j] += g[i * out_f + j];
    }
  });
  return out;
}

// Adds a per-feature bias to a [B, F] matrix.
template <typename T>
Var bias_row(Tape<T>& tape, Var x, Var b) {
  const auto& vx = tape.value(x);
  const auto& vb = tape.value(b);
  if (vx.shape().ndim() != 2) throw ShapeError("bias_row expects [B,F]");
  const int64_t bsz = vx.shape().dim(0), f = vx.shape().dim(1);
  if (vb.size() != f) throw ShapeError("bias_row: bias size mismatch");
  Tensor<T> y = vx;
  for (int64_t i = 0; i < bsz; ++i)
    for (int64_t j = 0; j < f; ++j) y[i * f + j] += vb[j];
  Var out = tape.alloc(std::move(y), tape.needs_grad(x) || tape.needs_grad(b));
  tape.record([x, b, out, bsz, f](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t i = 0; i < bsz; ++i)
        for (int64_t j = 0; j < f; ++j) gb[j] += g[i * f + j];
    }
  });
  return out;
}

// Adds a per-channel bias to a [B, C, H, W] map.
template <typename T>
Var bias_channel(Tape<T>& tape, Var x, Var b) {
  const auto& vx = tape.value(x);
  const auto& vb = tape.value(b);
  if (vx.shape().ndim() != 4) throw ShapeError("bias_channel expects [B,C,H,W]");
  const int64_t c = vx.shape().dim(1), hw = vx.shape().dim(2) * vx.shape().dim(3);
  if (vb.size() != c) throw ShapeError("bias_channel: bias size mismatch");
  Tensor<T> y = vx;
  const int64_t bsz = vx.shape().dim(0);
  for (int64_t n = 0; n < bsz; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      T* row = y.data() + (n * c + ch) * hw;
      const T bv = vb[ch];
      for (int64_t i = 0; i < hw; ++i) row[i] += bv;
    }
  Var out = tape.alloc(std::move(y), tape.needs_grad(x) || tape.needs_grad(b));
  tape.record([x, b, out, bsz, c, hw](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t n = 0; n < bsz; ++n)
        for (int64_t ch = 0; ch < c; ++ch) {
          const T* row = g.data() + (n * c + ch) * hw;
          T acc = T(0);
          for (int64_t i = 0; i < hw; ++i) acc += row[i];
          gb[ch] += acc;
        }
    }
  });
  return out;
}

// Channel concatenation of two [B, C, H, W] maps.
template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  if (va.shape().ndim() != 4 || vb.shape().ndim() != 4)
    throw ShapeError("concat_channels expects [B,C,H,W]");
  const int64_t bsz = va.shape().dim(0), ca = va.shape().dim(1), cb = vb.shape().dim(1);
  const int64_t h = va.shape().dim(2), w = va.shape().dim(3);
  if (vb.shape().dim(0) != bsz || vb.shape().dim(2) != h || vb.shape().dim(3) != w)
    throw ShapeError("concat_channels: incompatible shapes " + va.shape().str() + " and " +
                     vb.shape().str());
  Tensor<T> y(Shape{bsz, ca + cb, h, w});
  const int64_t hw = h * w;
  for (int64_t n = 0; n < bsz; ++n) {
    std::copy_n(va.data() + n * ca * hw, ca * hw, y.data() + n * (ca + cb) * hw);
    std::copy_n(vb.data() + n * cb * hw, cb * hw, y.data() + (n * (ca + cb) + ca) * hw);
  }
  Var out = tape.alloc(std::move(y), tape.needs_grad(a) || tape.needs_grad(b));
  tape.record([a, b, out, bsz, ca, cb, hw](Tape<T>& t) {
    const auto& g = t.grad(out);
    if (t.needs_grad(a)) {
      auto& ga = t.grad(a);
      for (int64_t n = 0; n < bsz; ++n) {
        const T* src = g.data() + n * (ca + cb) * hw;
        T* dst = ga.data() + n * ca * hw;
        for (int64_t i = 0; i < ca * hw; ++i) dst[i] += src[i];
      }
    }
    if (t.needs_grad(b)) {
      auto& gb = t.grad(b);
      for (int64_t n = 0; n < bsz; ++n) {
        const T* src = g.data() + (n * (ca + cb) + ca) * hw;
        T* dst = gb.data() + n * cb * hw;
        for (int64_t i = 0; i < cb * hw; ++i) dst[i] += src[i];
      }
    }
  });
  return out;
}

// Multiplies a [B, C, H, W] map by a single-channel coefficient map
// [B, 1, H, W], broadcast over channels. Used by the attention gate.
template <typename T>
Var mul_spatial_map(Tape<T>& tape, Var x, Var alpha) {
  const auto& vx = tape.value(x);
  const auto& va = tape.value(alpha);
  if (vx.shape().ndim() != 4 || va.shape().ndim() != 4 || va.shape().dim(1) != 1)
    throw ShapeError("mul_spatial_map expects x [B,C,H,W] and alpha [B,1,H,W]");
  const int64_t bsz = vx.shape().dim(0), c = vx.shape().dim(1);
  const int64_t hw = vx.shape().dim(2) * vx.shape().dim(3);
  if (va.shape().dim(0) != bsz || va.size() != bsz * hw)
    throw ShapeError("mul_spatial_map: spatial shape mismatch");
  Tensor<T> y(vx.shape());
  for (int64_t n = 0; n < bsz; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* xi = vx.data() + (n * c + ch) * hw;
      const T* ai = va.data() + n * hw;
      T* yi = y.data() + (n * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) yi[i] = xi[i] * ai[i];
    }
  Var out = tape.alloc(std::move(y), tape.needs_grad(x) || tape.needs_grad(alpha));
  tape.record([x, alpha, out, bsz, c, hw](Tape<T>& t) {
    const auto& g = t.grad(out);
    const auto& vx = t.value(x);
    const auto& va = t.value(alpha);
    if (t.needs_grad(x)) {
      auto& gx = t.grad(x);
      for (int64_t n = 0; n < bsz; ++n)
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t off = (n * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) gx[off + i] += g[off + i] * va[n * hw + i];
        }
    }
    if (t.needs_grad(alpha)) {
      auto& ga = t.grad(alpha);
      for (int64_t n = 0; n < bsz; ++n)
        for (int64_t ch = 0; ch < c; ++ch) {
          const int64_t off = (n * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) ga[n * hw + i] += g[off + i] * vx[off + i];
        }
    }
  });
  return out;
}

inline int64_t pooled_extent(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Max pooling with explicit window geometry; padded cells never win.
// `select` picks the window winner and is shared between the real pool
// (value order) and the complex pool (magnitude order).
template <typename T>
Var maxpool_indices(Tape<T>& tape, Var keys, Var x, int64_t k, int64_t stride, int64_t pad,
                    std::vector<int64_t>* indices_out);

template <typename T>
Var maxpool2d(Tape<T>& tape, Var x, int64_t k, int64_t stride, int64_t pad) {
  return maxpool_indices(tape, x, x, k, stride, pad, nullptr);
}

// Gathers x at precomputed per-output flat input indices (shared by both
// planes of the complex max pool).
template <typename T>
Var gather_pool(Tape<T>& tape, Var x, const std::vector<int64_t>& idx, Shape out_shape) {
  const auto& vx = tape.value(x);
  Tensor<T> y(out_shape);
  for (size_t i = 0; i < idx.size(); ++i) y[static_cast<int64_t>(i)] = vx[idx[i]];
  Var out = tape.alloc(std::move(y), tape.needs_grad(x));
  tape.record([x, out, idx](Tape<T>& t) {
    if (!t.needs_grad(x)) return;
    const auto& g = t.grad(out);
    auto& gx = t.grad(x);
    for (size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[static_cast<int64_t>(i)];
  });
  return out;
}

// keys: tensor ordering the selection (x itself for real max pooling,
// squared magnitude for the complex pool). Ties go to the first window
// element in row-major scan order.
template <typename T>
Var maxpool_indices(Tape<T>& tape, Var keys, Var x, int64_t k, int64_t stride, int64_t pad,
                    std::vector<int64_t>* indices_out) {
  const auto& vk = tape.value(keys);
  if (vk.shape().ndim() != 4) throw ShapeError("maxpool2d expects [B,C,H,W]");
  if (k < 1 || stride < 1 || pad < 0) throw GeometryError("maxpool2d: bad window geometry");
  const int64_t b = vk.shape().dim(0), c = vk.shape().dim(1);
  const int64_t h = vk.shape().dim(2), w = vk.shape().dim(3);
  const int64_t oh = pooled_extent(h, k, stride, pad);
  const int64_t ow = pooled_extent(w, k, stride, pad);
  if (oh < 1 || ow < 1)
    throw GeometryError("maxpool2d: output size < 1 for input " + vk.shape().str());
  std::vector<int64_t> idx(static_cast<size_t>(b * c * oh * ow));
  int64_t o = 0;
  for (int64_t n = 0; n < b; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * h * w;
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j, ++o) {
          int64_t best = -1;
          T best_v = T(0);
          for (int64_t di = 0; di < k; ++di) {
            const int64_t y = i * stride - pad + di;
            if (y < 0 || y >= h) continue;
            for (int64_t dj = 0; dj < k; ++dj) {
              const int64_t xx = j * stride - pad + dj;
              if (xx < 0 || xx >= w) continue;
              const int64_t flat = base + y * w + xx;
              const T v = vk[flat];
              if (best < 0 || v > best_v) {
                best = flat;
                best_v = v;
              }
            }
          }
          if (best < 0) throw GeometryError("maxpool2d: window contains no valid element");
          idx[static_cast<size_t>(o)] = best;
        }
    }
  if (indices_out) *indices_out = idx;
  return gather_pool(tape, x, idx, Shape{b, c, oh, ow});
}

// Average pooling over non-overlapping k x k windows (stride = k).
template <typename T>
Var avgpool2d(Tape<T>& tape, Var x, int64_t kh, int64_t kw) {
  const auto& vx = tape.value(x);
  if (vx.shape().ndim() != 4) throw ShapeError("avgpool2d expects [B,C,H,W]");
  const int64_t b = vx.shape().dim(0), c = vx.shape().dim(1);
  const int64_t h = vx.shape().dim(2), w = vx.shape().dim(3);
  if (kh < 1 || kw < 1 || h % kh != 0 || w % kw != 0)
    throw GeometryError("avgpool2d: spatial dims " + vx.shape().str() +
                        " not divisible by window");
  const int64_t oh = h / kh, ow = w / kw;
  Tensor<T> y(Shape{b, c, oh, ow});
  const T inv = T(1) / static_cast<T>(kh * kw);
  for (int64_t n = 0; n < b; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * h * w;
      const int64_t obase = (n * c + ch) * oh * ow;
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          T acc = T(0);
          for (int64_t di = 0; di < kh; ++di)
            for (int64_t dj = 0; dj < kw; ++dj)
              acc += vx[base + (i * kh + di) * w + (j * kw + dj)];
          y[obase + i * ow + j] = acc * inv;
        }
    }
  Var out = tape.alloc(std::move(y), tape.needs_grad(x));
  tape.record([x, out, b, c, h, w, kh, kw](Tape<T>& t) {
    if (!t.needs_grad(x)) return;
    const auto& g = t.grad(out);
    auto& gx = t.grad(x);
    const int64_t oh = h / kh, ow = w / kw;
    const T inv = T(1) / static_cast<T>(kh * kw);
    for (int64_t n = 0; n < b; ++n)
      for (int64_t ch = 0; ch < c; ++ch) {
        const int64_t base = (n * c + ch) * h * w;
        const int64_t obase = (n * c + ch) * oh * ow;
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j) {
            const T gv = g[obase + i * ow + j] * inv;
            for (int64_t di = 0; di < kh; ++di)
              for (int64_t dj = 0; dj < kw; ++dj)
                gx[base + (i * kh + di) * w + (j * kw + dj)] += gv;
          }
      }
  });
  return out;
}

// Nearest-neighbour upsampling by an integer factor.
template <typename T>
Var upsample_nearest(Tape<T>& tape, Var x, int64_t factor) {
  const auto& vx = tape.value(x);
  if (vx.shape().ndim() != 4) throw ShapeError("upsample_nearest expects [B,C,H,W]");
  if (factor < 1) throw GeometryError("upsample_nearest: factor must be >= 1");
  const int64_t b = vx.shape().dim(0), c = vx.shape().dim(1);
  const int64_t h = vx.shape().dim(2), w = vx.shape().dim(3);
  const int64_t oh = h * factor, ow = w * factor;
  Tensor<T> y(Shape{b, c, oh, ow});
  for (int64_t n = 0; n < b; ++n)
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t base = (n * c + ch) * h * w;
      const int64_t obase = (n * c + ch) * oh * ow;
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j)
          y[obase + i * ow + j] = vx[base + (i / factor) * w + (j / factor)];
    }
  Var out = tape.alloc(std::move(y), tape.needs_grad(x));
  tape.record([x, out, b, c, h, w, factor](Tape<T>& t) {
    if (!t.needs_grad(x)) return;
    const auto& g = t.grad(out);
    auto& gx = t.grad(x);
    const int64_t oh = h * factor, ow = w * factor;
    for (int64_t n = 0; n < b; ++n)
      for (int64_t ch = 0; ch < c; ++ch) {
        const int64_t base = (n * c + ch) * h * w;
        const int64_t obase = (n * c + ch) * oh * ow;
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j)
            gx[base + (i / factor) * w + (j / factor)] += g[obase + i * ow + j];
      }
  });
  return out;
}

// Batch normalization over [B, C, H, W] per channel. Training mode
// normalizes with biased batch statistics and updates the running
// buffers in place (running = (1-momentum)*running + momentum*batch);
// eval mode normalizes with the running buffers. The same biased
// variance flavour is used everywhere, so eval output equals training
// output whenever the running stats coincide with the batch stats.
template <typename T>
Var batchnorm2d(Tape<T>& tape, Var x, Var gamma, Var beta, Tensor<T>& running_mean,
                Tensor<T>& running_var, bool training, T momentum, T eps) {
  const auto& vx = tape.value(x);
  if (vx.shape().ndim() != 4) throw ShapeError("batchnorm2d expects [B,C,H,W]");
  const int64_t b = vx.shape().dim(0), c = vx.shape().dim(1);
  const int64_t hw = vx.shape().dim(2) * vx.shape().dim(3);
  if (training && b < 2)
    throw ContractError("batchnorm2d: training mode requires batch size >= 2");
  const int64_t n_per_c = b * hw;

  Tensor<T> mean(Shape{c}), var(Shape{c});
  if (training) {
    for (int64_t ch = 0; ch < c; ++ch) {
      T m = T(0);
      for (int64_t nn = 0; nn < b; ++nn) {
        const T* p = vx.data() + (nn * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) m += p[i];
      }
      m /= static_cast<T>(n_per_c);
      T v = T(0);
      for (int64_t nn = 0; nn < b; ++nn) {
        const T* p = vx.data() + (nn * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          const T d = p[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<T>(n_per_c);
      mean[ch] = m;
      var[ch] = v;
      running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * m;
      running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * v;
    }
  } else {
    mean = running_mean;
    var = running_var;
  }

  Tensor<T> inv_std(Shape{c});
  for (int64_t ch = 0; ch < c; ++ch) inv_std[ch] = T(1) / std::sqrt(var[ch] + eps);

  const auto& vg = tape.value(gamma);
  const auto& vb = tape.value(beta);
  Tensor<T> xhat(vx.shape()), y(vx.shape());
  for (int64_t nn = 0; nn < b; ++nn)
    for (int64_t ch = 0; ch < c; ++ch) {
      const int64_t off = (nn * c + ch) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        const T xn = (vx[off + i] - mean[ch]) * inv_std[ch];
        xhat[off + i] = xn;
        y[off + i] = vg[ch] * xn + vb[ch];
      }
    }

  bool ng = tape.needs_grad(x) || tape.needs_grad(gamma) || tape.needs_grad(beta);
  Var out = tape.alloc(std::move(y), ng);
  tape.record([x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), b, c,
               hw, training](Tape<T>& t) {
    const auto& g = t.grad(out);
    const auto& vg = t.value(gamma);
    const int64_t n_per_c = b * hw;
    for (int64_t ch = 0; ch < c; ++ch) {
      T sum_g = T(0), sum_gx = T(0);
      for (int64_t nn = 0; nn < b; ++nn) {
        const int64_t off = (nn * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          sum_g += g[off + i];
          sum_gx += g[off + i] * xhat[off + i];
        }
      }
      if (t.needs_grad(gamma)) t.grad(gamma)[ch] += sum_gx;
      if (t.needs_grad(beta)) t.grad(beta)[ch] += sum_g;
      if (t.needs_grad(x)) {
        auto& gx = t.grad(x);
        const T k = vg[ch] * inv_std[ch];
        if (training) {
          const T mg = sum_g / static_cast<T>(n_per_c);
          const T mgx = sum_gx / static_cast<T>(n_per_c);
          for (int64_t nn = 0; nn < b; ++nn) {
            const int64_t off = (nn * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i)
              gx[off + i] += k * (g[off + i] - mg - xhat[off + i] * mgx);
          }
        } else {
          for (int64_t nn = 0; nn < b; ++nn) {
            const int64_t off = (nn * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) gx[off + i] += k * g[off + i];
          }
        }
      }
    }
  });
  return out;
}

}  // namespace cxnn::ops
