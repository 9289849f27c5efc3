#pragma once

#include <atomic>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cxnn/autodiff.hpp"
#include "cxnn/conv.hpp"
#include "cxnn/ops.hpp"
#include "cxnn/rng.hpp"

namespace cxnn {

inline uint64_t next_param_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1);
}

constexpr double kPi = 3.14159265358979323846;

// Fan-in scaled uniform initialization for real weights; complex weights
// draw their magnitude from a Rayleigh distribution with sigma chosen so
// E|w|^2 = 1/fan_in and their phase uniformly from (-pi, pi].
template <typename T>
Tensor<T> init_uniform(Rng& rng, const Shape& shape, int64_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> init_complex(Rng& rng, const Shape& shape, int64_t fan_in) {
  const double sigma = 1.0 / std::sqrt(2.0 * static_cast<double>(fan_in));
  Tensor<T> re(shape), im(shape);
  for (int64_t i = 0; i < re.size(); ++i) {
    double u = rng.uniform();
    if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
    const double mag = sigma * std::sqrt(-2.0 * std::log(1.0 - u));
    const double phase = rng.uniform(-kPi, kPi);
    re[i] = static_cast<T>(mag * std::cos(phase));
    im[i] = static_cast<T>(mag * std::sin(phase));
  }
  return {std::move(re), std::move(im)};
}

template <typename T>
Parameter<T> make_weight(Rng& rng, const std::string& name, const Shape& shape, int64_t fan_in,
                         Domain domain) {
  if (domain == Domain::Complex) {
    auto [re, im] = init_complex<T>(rng, shape, fan_in);
    return Parameter<T>::complex(next_param_id(), name, std::move(re), std::move(im));
  }
  return Parameter<T>::real(next_param_id(), name, init_uniform<T>(rng, shape, fan_in));
}

template <typename T>
Parameter<T> make_bias(Rng& rng, const std::string& name, int64_t n, int64_t fan_in,
                       Domain domain) {
  if (domain == Domain::Complex)
    return Parameter<T>::complex(next_param_id(), name,
                                 init_uniform<T>(rng, Shape{n}, fan_in),
                                 init_uniform<T>(rng, Shape{n}, fan_in));
  return Parameter<T>::real(next_param_id(), name, init_uniform<T>(rng, Shape{n}, fan_in));
}

// Lifts a constant zero imaginary plane next to a real tape value.
template <typename T>
TapeVal lift_complex(Tape<T>& tape, Var re) {
  return TapeVal::complex(re, tape.constant(Tensor<T>::zeros(tape.value(re).shape())));
}

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual TapeVal forward(Tape<T>& tape, TapeVal x, bool training) = 0;
  virtual void collect_params(std::vector<Parameter<T>*>& out) {}
  virtual Domain domain() const { return Domain::Real; }
};

template <typename T>
class Conv2dLayer : public Layer<T> {
 public:
  Conv2dLayer(Rng& rng, std::string name, Conv2dSpec spec) : spec_(spec) {
    spec_.validate();
    const int64_t fan_in = spec_.in_channels * spec_.kh * spec_.kw;
    const Shape wshape{spec_.out_channels, spec_.in_channels, spec_.kh, spec_.kw};
    weight_ = make_weight<T>(rng, name + ".weight", wshape, fan_in, spec_.domain);
    if (spec_.bias)
      bias_ = make_bias<T>(rng, name + ".bias", spec_.out_channels, fan_in, spec_.domain);
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    if (spec_.domain == Domain::Complex) {
      if (!x.is_complex()) throw ShapeError("complex conv2d fed a real value");
      TapeVal w = tape.leaf(weight_);
      Var b_re, b_im;
      if (spec_.bias) {
        TapeVal b = tape.leaf(bias_);
        b_re = b.re;
        b_im = b.im;
      }
      auto s = ops::conv2d_complex(tape, x.re, x.im, w.re, w.im, b_re, b_im, spec_);
      return TapeVal::complex(s.re, s.im);
    }
    if (x.is_complex()) throw ShapeError("real conv2d fed a complex value");
    TapeVal w = tape.leaf(weight_);
    Var b = spec_.bias ? tape.leaf(bias_).re : Var{};
    return TapeVal::real(ops::conv2d(tape, x.re, w.re, b, spec_));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&weight_);
    if (spec_.bias) out.push_back(&bias_);
  }
  Domain domain() const override { return spec_.domain; }
  const Conv2dSpec& spec() const { return spec_; }

 private:
  Conv2dSpec spec_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

// Transposed convolution, kernel 2 stride 2, for decoder upsampling.
template <typename T>
class TransposedConv2x2Layer : public Layer<T> {
 public:
  TransposedConv2x2Layer(Rng& rng, std::string name, int64_t in_ch, int64_t out_ch,
                         Domain domain)
      : in_ch_(in_ch), out_ch_(out_ch), domain_(domain) {
    const int64_t fan_in = in_ch * 4;
    const Shape wshape{in_ch, out_ch, 2, 2};
    weight_ = make_weight<T>(rng, name + ".weight", wshape, fan_in, domain);
    bias_ = make_bias<T>(rng, name + ".bias", out_ch, fan_in, domain);
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    TapeVal w = tape.leaf(weight_);
    TapeVal b = tape.leaf(bias_);
    if (domain_ == Domain::Complex) {
      if (!x.is_complex()) throw ShapeError("complex transposed conv fed a real value");
      Var none;
      Var rr = ops::conv_transpose2x2(tape, x.re, w.re, none);
      Var ii = ops::conv_transpose2x2(tape, x.im, w.im, none);
      Var ri = ops::conv_transpose2x2(tape, x.re, w.im, none);
      Var ir = ops::conv_transpose2x2(tape, x.im, w.re, none);
      Var s_re = ops::bias_channel(tape, ops::sub(tape, rr, ii), b.re);
      Var s_im = ops::bias_channel(tape, ops::add(tape, ri, ir), b.im);
      return TapeVal::complex(s_re, s_im);
    }
    if (x.is_complex()) throw ShapeError("real transposed conv fed a complex value");
    return TapeVal::real(ops::conv_transpose2x2(tape, x.re, w.re, b.re));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  Domain domain() const override { return domain_; }

 private:
  int64_t in_ch_, out_ch_;
  Domain domain_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class LinearLayer : public Layer<T> {
 public:
  LinearLayer(Rng& rng, std::string name, int64_t in, int64_t out, Domain domain,
              bool bias = true)
      : in_(in), out_(out), domain_(domain), has_bias_(bias) {
    weight_ = make_weight<T>(rng, name + ".weight", Shape{out, in}, in, domain);
    if (bias) bias_param_ = make_bias<T>(rng, name + ".bias", out, in, domain);
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    TapeVal w = tape.leaf(weight_);
    if (domain_ == Domain::Complex) {
      if (!x.is_complex()) throw ShapeError("complex linear fed a real value");
      Var none;
      Var rr = ops::linear(tape, x.re, w.re, none);
      Var ii = ops::linear(tape, x.im, w.im, none);
      Var ri = ops::linear(tape, x.re, w.im, none);
      Var ir = ops::linear(tape, x.im, w.re, none);
      Var y_re = ops::sub(tape, rr, ii);
      Var y_im = ops::add(tape, ri, ir);
      if (has_bias_) {
        TapeVal b = tape.leaf(bias_param_);
        y_re = ops::bias_row(tape, y_re, b.re);
        y_im = ops::bias_row(tape, y_im, b.im);
      }
      return TapeVal::complex(y_re, y_im);
    }
    if (x.is_complex()) throw ShapeError("real linear fed a complex value");
    Var b = has_bias_ ? tape.leaf(bias_param_).re : Var{};
    return TapeVal::real(ops::linear(tape, x.re, w.re, b));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_param_);
  }
  Domain domain() const override { return domain_; }

 private:
  int64_t in_, out_;
  Domain domain_;
  bool has_bias_;
  Parameter<T> weight_;
  Parameter<T> bias_param_;
};

// ReLU on real values; CReLU (independent ReLU per plane) on complex.
template <typename T>
class ReluLayer : public Layer<T> {
 public:
  explicit ReluLayer(Domain domain) : domain_(domain) {}
  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    if (x.is_complex())
      return TapeVal::complex(ops::relu(tape, x.re), ops::relu(tape, x.im));
    return TapeVal::real(ops::relu(tape, x.re));
  }
  Domain domain() const override { return domain_; }

 private:
  Domain domain_;
};

// Per-channel batch normalization. The complex form is the split
// formulation: each plane is normalized independently with its own scale
// and shift, which keeps the 2x parameter rule exact.
template <typename T>
class BatchNorm2dLayer : public Layer<T> {
 public:
  BatchNorm2dLayer(std::string name, int64_t channels, Domain domain, T momentum = T(0.1),
                   T eps = T(1e-5))
      : channels_(channels), domain_(domain), momentum_(momentum), eps_(eps) {
    if (domain == Domain::Complex) {
      gamma_ = Parameter<T>::complex(next_param_id(), name + ".gamma",
                                     Tensor<T>::ones(Shape{channels}),
                                     Tensor<T>::ones(Shape{channels}));
      beta_ = Parameter<T>::complex(next_param_id(), name + ".beta",
                                    Tensor<T>::zeros(Shape{channels}),
                                    Tensor<T>::zeros(Shape{channels}));
      running_mean_im_ = Tensor<T>::zeros(Shape{channels});
      running_var_im_ = Tensor<T>::ones(Shape{channels});
    } else {
      gamma_ = Parameter<T>::real(next_param_id(), name + ".gamma",
                                  Tensor<T>::ones(Shape{channels}));
      beta_ = Parameter<T>::real(next_param_id(), name + ".beta",
                                 Tensor<T>::zeros(Shape{channels}));
    }
    running_mean_re_ = Tensor<T>::zeros(Shape{channels});
    running_var_re_ = Tensor<T>::ones(Shape{channels});
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
    TapeVal g = tape.leaf(gamma_);
    TapeVal b = tape.leaf(beta_);
    if (domain_ == Domain::Complex) {
      if (!x.is_complex()) throw ShapeError("complex batchnorm fed a real value");
      Var y_re = ops::batchnorm2d(tape, x.re, g.re, b.re, running_mean_re_, running_var_re_,
                                  training, momentum_, eps_);
      Var y_im = ops::batchnorm2d(tape, x.im, g.im, b.im, running_mean_im_, running_var_im_,
                                  training, momentum_, eps_);
      return TapeVal::complex(y_re, y_im);
    }
    if (x.is_complex()) throw ShapeError("real batchnorm fed a complex value");
    return TapeVal::real(ops::batchnorm2d(tape, x.re, g.re, b.re, running_mean_re_,
                                          running_var_re_, training, momentum_, eps_));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  Domain domain() const override { return domain_; }

  // Test hook: force running stats.
  void set_running_stats(Tensor<T> mean, Tensor<T> var, int plane = 0) {
    if (plane == 0) {
      running_mean_re_ = std::move(mean);
      running_var_re_ = std::move(var);
    } else {
      running_mean_im_ = std::move(mean);
      running_var_im_ = std::move(var);
    }
  }

 private:
  int64_t channels_;
  Domain domain_;
  T momentum_, eps_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_re_, running_var_re_;
  Tensor<T> running_mean_im_, running_var_im_;
};

// Max pooling: plain window max for real values; for complex values the
// window element with the largest magnitude is selected (ties resolved
// to the first element in scan order) and both planes are gathered at
// the selected index, preserving phase.
template <typename T>
class MaxPool2dLayer : public Layer<T> {
 public:
  MaxPool2dLayer(int64_t k, int64_t stride, int64_t pad, Domain domain)
      : k_(k), stride_(stride), pad_(pad), domain_(domain) {}

  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    if (domain_ == Domain::Complex) {
      if (!x.is_complex()) throw ShapeError("complex maxpool fed a real value");
      const auto& re = tape.value(x.re);
      const auto& im = tape.value(x.im);
      Tensor<T> keys(re.shape());
      for (int64_t i = 0; i < keys.size(); ++i)
        keys[i] = re[i] * re[i] + im[i] * im[i];
      Var keys_var = tape.constant(std::move(keys));
      std::vector<int64_t> idx;
      Var y_re = ops::maxpool_indices(tape, keys_var, x.re, k_, stride_, pad_, &idx);
      Var y_im = ops::gather_pool(tape, x.im, idx, tape.value(y_re).shape());
      return TapeVal::complex(y_re, y_im);
    }
    if (x.is_complex()) throw ShapeError("real maxpool fed a complex value");
    return TapeVal::real(ops::maxpool2d(tape, x.re, k_, stride_, pad_));
  }
  Domain domain() const override { return domain_; }

 private:
  int64_t k_, stride_, pad_;
  Domain domain_;
};

// Average pooling over non-overlapping windows, componentwise on complex
// values.
template <typename T>
class AvgPool2dLayer : public Layer<T> {
 public:
  AvgPool2dLayer(int64_t k, Domain domain) : k_(k), domain_(domain) {}
  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    if (x.is_complex())
      return TapeVal::complex(ops::avgpool2d(tape, x.re, k_, k_),
                              ops::avgpool2d(tape, x.im, k_, k_));
    return TapeVal::real(ops::avgpool2d(tape, x.re, k_, k_));
  }
  Domain domain() const override { return domain_; }

 private:
  int64_t k_;
  Domain domain_;
};

// Pools the full spatial extent down to 1x1.
template <typename T>
class GlobalAvgPoolLayer : public Layer<T> {
 public:
  explicit GlobalAvgPoolLayer(Domain domain) : domain_(domain) {}
  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    const auto& s = tape.value(x.re).shape();
    const int64_t h = s.dim(2), w = s.dim(3);
    if (x.is_complex())
      return TapeVal::complex(ops::avgpool2d(tape, x.re, h, w),
                              ops::avgpool2d(tape, x.im, h, w));
    return TapeVal::real(ops::avgpool2d(tape, x.re, h, w));
  }
  Domain domain() const override { return domain_; }

 private:
  Domain domain_;
};

template <typename T>
class UpsampleNearestLayer : public Layer<T> {
 public:
  UpsampleNearestLayer(int64_t factor, Domain domain) : factor_(factor), domain_(domain) {}
  TapeVal forward(Tape<T>& tape, TapeVal x, bool) override {
    if (x.is_complex())
      return TapeVal::complex(ops::upsample_nearest(tape, x.re, factor_),
                              ops::upsample_nearest(tape, x.im, factor_));
    return TapeVal::real(ops::upsample_nearest(tape, x.re, factor_));
  }
  Domain domain() const override { return domain_; }

 private:
  int64_t factor_;
  Domain domain_;
};

// Additive attention gate. alpha = sigmoid(psi(act(Wg*g + Ws*s))) scales
// the skip connection. In the complex domain Wg, Ws and psi are complex
// 1x1 convolutions and the sigmoid acts on the magnitude of psi's
// normalized output, so alpha stays real and scaling preserves phase.
template <typename T>
class AttentionGate {
 public:
  AttentionGate(Rng& rng, std::string name, int64_t gate_ch, int64_t skip_ch, int64_t inter_ch,
                Domain domain)
      : domain_(domain),
        wg_(rng, name + ".wg", conv1x1(gate_ch, inter_ch, domain)),
        ws_(rng, name + ".ws", conv1x1(skip_ch, inter_ch, domain)),
        psi_(rng, name + ".psi", conv1x1(inter_ch, 1, domain)),
        bn_g_(name + ".bn_g", inter_ch, domain),
        bn_s_(name + ".bn_s", inter_ch, domain),
        bn_psi_(name + ".bn_psi", 1, domain) {}

  TapeVal forward(Tape<T>& tape, TapeVal gate, TapeVal skip, bool training) {
    TapeVal g1 = bn_g_.forward(tape, wg_.forward(tape, gate, training), training);
    TapeVal s1 = bn_s_.forward(tape, ws_.forward(tape, skip, training), training);
    TapeVal q;
    if (domain_ == Domain::Complex) {
      q = TapeVal::complex(ops::add(tape, g1.re, s1.re), ops::add(tape, g1.im, s1.im));
      q = TapeVal::complex(ops::relu(tape, q.re), ops::relu(tape, q.im));
      TapeVal p = bn_psi_.forward(tape, psi_.forward(tape, q, training), training);
      Var mag = ops::complex_magnitude(tape, p.re, p.im);
      Var alpha = ops::sigmoid(tape, mag);
      return TapeVal::complex(ops::mul_spatial_map(tape, skip.re, alpha),
                              ops::mul_spatial_map(tape, skip.im, alpha));
    }
    q = TapeVal::real(ops::relu(tape, ops::add(tape, g1.re, s1.re)));
    TapeVal p = bn_psi_.forward(tape, psi_.forward(tape, q, training), training);
    Var alpha = ops::sigmoid(tape, p.re);
    return TapeVal::real(ops::mul_spatial_map(tape, skip.re, alpha));
  }

  void collect_params(std::vector<Parameter<T>*>& out) {
    wg_.collect_params(out);
    ws_.collect_params(out);
    psi_.collect_params(out);
    bn_g_.collect_params(out);
    bn_s_.collect_params(out);
    bn_psi_.collect_params(out);
  }

 private:
  static Conv2dSpec conv1x1(int64_t in, int64_t out, Domain domain) {
    Conv2dSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kh = s.kw = 1;
    s.bias = true;
    s.domain = domain;
    return s;
  }

  Domain domain_;
  Conv2dLayer<T> wg_, ws_, psi_;
  BatchNorm2dLayer<T> bn_g_, bn_s_, bn_psi_;
};

// How complex scores become real ones at the output head.
enum class HeadProjection { Magnitude, RealPart };

template <typename T>
Var project_to_real(Tape<T>& tape, TapeVal x, HeadProjection proj) {
  if (!x.is_complex()) return x.re;
  if (proj == HeadProjection::Magnitude) return ops::complex_magnitude(tape, x.re, x.im);
  return x.re;
}

// Ordered stack of layers; adjacent layers must agree on domain, checked
// as values flow through.
template <typename T>
class LayerStack : public Layer<T> {
 public:
  LayerStack() = default;

  void push(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
    for (auto& l : layers_) x = l->forward(tape, x, training);
    return x;
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }

  Domain domain() const override {
    return layers_.empty() ? Domain::Real : layers_.back()->domain();
  }

  size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace cxnn
