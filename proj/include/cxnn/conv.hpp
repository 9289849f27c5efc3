#pragma once

#include <cstdint>
#include <string>

#include "cxnn/autodiff.hpp"
#include "cxnn/ops.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn {

// 2-D convolution geometry and layer description. The output extent is
// floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1 and must be >= 1.
struct Conv2dSpec {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  int64_t kh = 3, kw = 3;
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
  bool bias = true;
  Domain domain = Domain::Real;

  void validate() const {
    if (in_channels < 1 || out_channels < 1 || kh < 1 || kw < 1)
      throw SpecError("conv2d: channels and kernel extents must be >= 1");
    if (stride < 1 || dilation < 1 || padding < 0)
      throw GeometryError("conv2d: stride/dilation must be >= 1 and padding >= 0");
  }

  int64_t out_extent(int64_t in, int64_t k) const {
    return (in + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
  }

  // Trainable real coordinates; complex kernels carry two planes.
  int64_t param_count() const {
    int64_t n = in_channels * out_channels * kh * kw + (bias ? out_channels : 0);
    return domain == Domain::Complex ? 2 * n : n;
  }
};

namespace detail {

// Unfolds one batch item into a [C*kh*kw, OH*OW] patch matrix.
template <typename T>
void im2col(const T* x, int64_t c, int64_t h, int64_t w, const Conv2dSpec& s, int64_t oh,
            int64_t ow, T* cols) {
  int64_t row = 0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t di = 0; di < s.kh; ++di)
      for (int64_t dj = 0; dj < s.kw; ++dj, ++row) {
        T* dst = cols + row * oh * ow;
        const T* src = x + ch * h * w;
        for (int64_t i = 0; i < oh; ++i) {
          const int64_t y = i * s.stride - s.padding + di * s.dilation;
          if (y < 0 || y >= h) {
            for (int64_t j = 0; j < ow; ++j) dst[i * ow + j] = T(0);
            continue;
          }
          for (int64_t j = 0; j < ow; ++j) {
            const int64_t xx = j * s.stride - s.padding + dj * s.dilation;
            dst[i * ow + j] = (xx < 0 || xx >= w) ? T(0) : src[y * w + xx];
          }
        }
      }
}

// Scatter-adds a patch matrix back onto the input plane.
template <typename T>
void col2im(const T* cols, int64_t c, int64_t h, int64_t w, const Conv2dSpec& s, int64_t oh,
            int64_t ow, T* x) {
  int64_t row = 0;
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t di = 0; di < s.kh; ++di)
      for (int64_t dj = 0; dj < s.kw; ++dj, ++row) {
        const T* src = cols + row * oh * ow;
        T* dst = x + ch * h * w;
        for (int64_t i = 0; i < oh; ++i) {
          const int64_t y = i * s.stride - s.padding + di * s.dilation;
          if (y < 0 || y >= h) continue;
          for (int64_t j = 0; j < ow; ++j) {
            const int64_t xx = j * s.stride - s.padding + dj * s.dilation;
            if (xx >= 0 && xx < w) dst[y * w + xx] += src[i * ow + j];
          }
        }
      }
}

}  // namespace detail

namespace ops {

// Real 2-D cross-correlation of x [B,C,H,W] with weights [OC,C,kh,kw],
// realized as per-item im2col + GEMM. Bias, when given, is added per
// output channel.
template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var w, Var bias, const Conv2dSpec& spec) {
  spec.validate();
  const auto& vx = tape.value(x);
  const auto& vw = tape.value(w);
  if (vx.shape().ndim() != 4) throw ShapeError("conv2d expects input [B,C,H,W]");
  const int64_t b = vx.shape().dim(0), c = vx.shape().dim(1);
  const int64_t h = vx.shape().dim(2), ww = vx.shape().dim(3);
  if (c != spec.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(c) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  if (vw.shape() != Shape{spec.out_channels, spec.in_channels, spec.kh, spec.kw})
    throw ShapeError("conv2d: weight shape " + vw.shape().str() + " does not match spec");
  const int64_t oh = spec.out_extent(h, spec.kh);
  const int64_t ow = spec.out_extent(ww, spec.kw);
  if (oh < 1 || ow < 1)
    throw GeometryError("conv2d: output size < 1 for input " + vx.shape().str());

  const int64_t k = c * spec.kh * spec.kw;
  const int64_t oc = spec.out_channels;
  Tensor<T> y(Shape{b, oc, oh, ow});
  {
    Tensor<T> cols(Shape{k, oh * ow});
    for (int64_t n = 0; n < b; ++n) {
      detail::im2col(vx.data() + n * c * h * ww, c, h, ww, spec, oh, ow, cols.data());
      gemm_acc(vw.data(), cols.data(), y.data() + n * oc * oh * ow, oc, k, oh * ow);
    }
  }
  bool ng = tape.needs_grad(x) || tape.needs_grad(w) || (bias.valid() && tape.needs_grad(bias));
  Var out = tape.alloc(std::move(y), ng);
  tape.record([x, w, out, spec, b, c, h, ww, oh, ow, k](Tape<T>& t) {
    const auto& g = t.grad(out);
    const int64_t oc = spec.out_channels;
    Tensor<T> cols(Shape{k, oh * ow});
    const bool need_x = t.needs_grad(x), need_w = t.needs_grad(w);
    if (!need_x && !need_w) return;
    for (int64_t n = 0; n < b; ++n) {
      const T* gn = g.data() + n * oc * oh * ow;
      if (need_w) {
        detail::im2col(t.value(x).data() + n * c * h * ww, c, h, ww, spec, oh, ow, cols.data());
        gemm_acc(gn, cols.data(), t.grad(w).data(), oc, oh * ow, k, false, true);
      }
      if (need_x) {
        Tensor<T> dcols(Shape{k, oh * ow});
        gemm_acc(t.value(w).data(), gn, dcols.data(), k, oc, oh * ow, true, false);
        detail::col2im(dcols.data(), c, h, ww, spec, oh, ow, t.grad(x).data() + n * c * h * ww);
      }
    }
  });
  return bias.valid() ? bias_channel(tape, out, bias) : out;
}

// Transposed convolution restricted to kernel 2, stride 2 (the UNet
// decoder case): every input pixel paints a disjoint 2x2 output patch.
// Weight layout [IC, OC, 2, 2].
template <typename T>
Var conv_transpose2x2(Tape<T>& tape, Var x, Var w, Var bias) {
  const auto& vx = tape.value(x);
  const auto& vw = tape.value(w);
  if (vx.shape().ndim() != 4 || vw.shape().ndim() != 4)
    throw ShapeError("conv_transpose2x2 expects [B,C,H,W] input and [IC,OC,2,2] weight");
  const int64_t b = vx.shape().dim(0), ic = vx.shape().dim(1);
  const int64_t h = vx.shape().dim(2), ww = vx.shape().dim(3);
  const int64_t oc = vw.shape().dim(1);
  if (vw.shape().dim(0) != ic || vw.shape().dim(2) != 2 || vw.shape().dim(3) != 2)
    throw ShapeError("conv_transpose2x2: weight shape " + vw.shape().str() + " invalid for " +
                     std::to_string(ic) + " input channels");
  Tensor<T> y(Shape{b, oc, 2 * h, 2 * ww});
  for (int64_t n = 0; n < b; ++n)
    for (int64_t co = 0; co < oc; ++co) {
      T* yp = y.data() + (n * oc + co) * 4 * h * ww;
      for (int64_t ci = 0; ci < ic; ++ci) {
        const T* xp = vx.data() + (n * ic + ci) * h * ww;
        const T* wp = vw.data() + (ci * oc + co) * 4;
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < ww; ++j) {
            const T v = xp[i * ww + j];
            T* o = yp + (2 * i) * (2 * ww) + 2 * j;
            o[0] += v * wp[0];
            o[1] += v * wp[1];
            o[2 * ww] += v * wp[2];
            o[2 * ww + 1] += v * wp[3];
          }
      }
    }
  bool ng = tape.needs_grad(x) || tape.needs_grad(w) || (bias.valid() && tape.needs_grad(bias));
  Var out = tape.alloc(std::move(y), ng);
  tape.record([x, w, out, b, ic, oc, h, ww](Tape<T>& t) {
    const auto& g = t.grad(out);
    const bool need_x = t.needs_grad(x), need_w = t.needs_grad(w);
    if (!need_x && !need_w) return;
    for (int64_t n = 0; n < b; ++n)
      for (int64_t co = 0; co < oc; ++co) {
        const T* gp = g.data() + (n * oc + co) * 4 * h * ww;
        for (int64_t ci = 0; ci < ic; ++ci) {
          const T* xp = t.value(x).data() + (n * ic + ci) * h * ww;
          const T* wp = t.value(w).data() + (ci * oc + co) * 4;
          T* gxp = need_x ? t.grad(x).data() + (n * ic + ci) * h * ww : nullptr;
          T* gwp = need_w ? t.grad(w).data() + (ci * oc + co) * 4 : nullptr;
          for (int64_t i = 0; i < h; ++i)
            for (int64_t j = 0; j < ww; ++j) {
              const T* go = gp + (2 * i) * (2 * ww) + 2 * j;
              if (gxp)
                gxp[i * ww + j] += go[0] * wp[0] + go[1] * wp[1] + go[2 * ww] * wp[2] +
                                   go[2 * ww + 1] * wp[3];
              if (gwp) {
                const T v = xp[i * ww + j];
                gwp[0] += go[0] * v;
                gwp[1] += go[1] * v;
                gwp[2] += go[2 * ww] * v;
                gwp[3] += go[2 * ww + 1] * v;
              }
            }
        }
      }
  });
  return bias.valid() ? bias_channel(tape, out, bias) : out;
}

struct ComplexPair {
  Var re, im;
};

// Complex convolution composed from four real convolutions:
//   s_r = (w_r * x_r) - (w_i * x_i),  s_i = (w_i * x_r) + (w_r * x_i).
// The output planes are the signed sums of the four real results on the
// same arithmetic path, which the equivalence tests rely on.
template <typename T>
ComplexPair conv2d_complex(Tape<T>& tape, Var x_re, Var x_im, Var w_re, Var w_im, Var b_re,
                           Var b_im, const Conv2dSpec& spec) {
  Var no_bias;
  Var rr = conv2d(tape, x_re, w_re, no_bias, spec);
  Var ii = conv2d(tape, x_im, w_im, no_bias, spec);
  Var ri = conv2d(tape, x_re, w_im, no_bias, spec);
  Var ir = conv2d(tape, x_im, w_re, no_bias, spec);
  Var s_re = sub(tape, rr, ii);
  Var s_im = add(tape, ri, ir);
  if (b_re.valid()) s_re = bias_channel(tape, s_re, b_re);
  if (b_im.valid()) s_im = bias_channel(tape, s_im, b_im);
  return {s_re, s_im};
}

}  // namespace ops
}  // namespace cxnn
