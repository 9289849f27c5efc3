#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cxnn/layers.hpp"

namespace cxnn {

enum class ArchFamily { ResNet18, ResNet34, ResNet50, UNet, AttentionUNet, ReconResNet };
enum class TaskKind { Classification, Segmentation };

inline const char* family_name(ArchFamily f) {
  switch (f) {
    case ArchFamily::ResNet18: return "resnet18";
    case ArchFamily::ResNet34: return "resnet34";
    case ArchFamily::ResNet50: return "resnet50";
    case ArchFamily::UNet: return "unet";
    case ArchFamily::AttentionUNet: return "attention_unet";
    case ArchFamily::ReconResNet: return "reconresnet";
  }
  return "?";
}

enum class HeadMode { Auto, Magnitude, RealPart };

// Declarative architecture description. base_width = 0 selects the
// family's canonical width (64 for every family here). width_scale is a
// continuous per-stage channel multiplier used by the widening variant;
// stage widths are rounded to the nearest integer (>= 1) after scaling.
struct ArchSpec {
  ArchFamily family = ArchFamily::ResNet18;
  TaskKind task = TaskKind::Classification;
  int64_t num_classes = 3;
  int64_t in_channels = 1;
  int64_t base_width = 0;
  double width_scale = 1.0;
  std::vector<int64_t> depth;  // ResNet: 4 block counts; ReconResNet: {n_res_blocks}
  HeadMode head_mode = HeadMode::Auto;

  int64_t width() const { return base_width > 0 ? base_width : 64; }

  std::vector<int64_t> canonical_depth() const {
    switch (family) {
      case ArchFamily::ResNet18: return {2, 2, 2, 2};
      case ArchFamily::ResNet34: return {3, 4, 6, 3};
      case ArchFamily::ResNet50: return {3, 4, 6, 3};
      case ArchFamily::ReconResNet: return {14};
      default: return {};
    }
  }

  std::vector<int64_t> block_depth() const {
    return depth.empty() ? canonical_depth() : depth;
  }

  void validate() const {
    const bool is_resnet = family == ArchFamily::ResNet18 || family == ArchFamily::ResNet34 ||
                           family == ArchFamily::ResNet50;
    if (is_resnet && task != TaskKind::Classification)
      throw SpecError("ResNet families support classification only");
    if (!is_resnet && task != TaskKind::Segmentation)
      throw SpecError(std::string(family_name(family)) + " supports segmentation only");
    if (num_classes < 1 || in_channels < 1) throw SpecError("num_classes/in_channels must be >= 1");
    if (is_resnet && block_depth().size() != 4)
      throw SpecError("ResNet depth config needs 4 block counts");
    if (family == ArchFamily::ReconResNet && block_depth().size() != 1)
      throw SpecError("ReconResNet depth config is a single residual-block count");
  }

  int64_t stage_width(int64_t multiple) const {
    const double scaled = static_cast<double>(width() * multiple) * width_scale;
    const int64_t w = static_cast<int64_t>(std::llround(scaled));
    return w < 1 ? 1 : w;
  }

  HeadProjection head_projection() const {
    switch (head_mode) {
      case HeadMode::Magnitude: return HeadProjection::Magnitude;
      case HeadMode::RealPart: return HeadProjection::RealPart;
      case HeadMode::Auto:
      default:
        // Magnitude scores suit softmax; segmentation needs sign-carrying
        // logits because sigmoid(|z|) can never drop below 1/2.
        return task == TaskKind::Classification ? HeadProjection::Magnitude
                                                : HeadProjection::RealPart;
    }
  }
};

// Variant selector: the CNN / CNNx2 / CV-CNN triplet.
struct Variant {
  enum class Kind { Real, WidenedReal, Complex };
  Kind kind = Kind::Real;
  double param_multiplier = 2.0;   // WidenedReal only
  bool literal_channels = false;   // widen channels by the raw factor instead

  static Variant real() { return Variant{Kind::Real, 1.0, false}; }
  static Variant widened(double m, bool literal = false) {
    return Variant{Kind::WidenedReal, m, literal};
  }
  static Variant complex() { return Variant{Kind::Complex, 1.0, false}; }

  const char* label() const {
    switch (kind) {
      case Kind::Real: return "CNN";
      case Kind::WidenedReal: return "CNNx2";
      case Kind::Complex: return "CV-CNN";
    }
    return "?";
  }
};

// Channel widening: multiplies every stage width by sqrt(multiplier) so
// the parameter count of the convolution-dominated stack scales by
// roughly the multiplier itself. The achieved ratio is verified at build
// time against a 3% tolerance. literal mode multiplies channels by the
// raw factor instead (a literal "twice the features" reading).
inline ArchSpec widen(const ArchSpec& spec, double param_multiplier, bool literal = false) {
  if (param_multiplier < 1.0)
    throw SpecError("widen: param_multiplier must be >= 1");
  ArchSpec out = spec;
  out.width_scale *= literal ? param_multiplier : std::sqrt(param_multiplier);
  return out;
}

struct ModelMeta {
  ArchFamily family;
  TaskKind task;
  Variant variant;
  HeadProjection head;
  std::vector<int64_t> stage_features;  // channel count per stage
  int64_t total_features = 0;           // out-channels summed over layers
  int64_t trainable = 0;                // real scalar coordinates
};

template <typename T>
class Model {
 public:
  virtual ~Model() = default;

  // input: real [B, in_channels, H, W]. Returns real scores:
  // [B, num_classes] for classification, [B, num_classes, H, W] for
  // segmentation. Complex variants lift the input internally.
  virtual Var forward(Tape<T>& tape, Var input, bool training) = 0;
  virtual void collect_params(std::vector<Parameter<T>*>& out) = 0;

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    collect_params(out);
    return out;
  }

  int64_t trainable_count() {
    int64_t n = 0;
    for (auto* p : parameters()) n += p->coord_count();
    return n;
  }

  ModelMeta meta;
};

template <typename T>
using ModelHandle = std::unique_ptr<Model<T>>;

namespace build_detail {

// Tracks the feature-count metadata convention: each conv / transposed
// conv / linear contributes its out-channel count once, complex or not.
struct FeatureCounter {
  int64_t total = 0;
  void add(int64_t out_channels) { total += out_channels; }
};

inline Conv2dSpec conv_spec(int64_t in, int64_t out, int64_t k, int64_t stride, int64_t pad,
                            bool bias, Domain d) {
  Conv2dSpec s;
  s.in_channels = in;
  s.out_channels = out;
  s.kh = s.kw = k;
  s.stride = stride;
  s.padding = pad;
  s.bias = bias;
  s.domain = d;
  return s;
}

template <typename T>
std::unique_ptr<Conv2dLayer<T>> conv(Rng& rng, FeatureCounter& fc, const std::string& name,
                                     int64_t in, int64_t out, int64_t k, int64_t stride,
                                     int64_t pad, bool bias, Domain d) {
  fc.add(out);
  return std::make_unique<Conv2dLayer<T>>(rng, name, conv_spec(in, out, k, stride, pad, bias, d));
}

// conv + BN + ReLU, the workhorse block.
template <typename T>
void push_cbr(LayerStack<T>& stack, Rng& rng, FeatureCounter& fc, const std::string& name,
              int64_t in, int64_t out, int64_t k, int64_t stride, int64_t pad, bool bias,
              Domain d) {
  stack.push(conv<T>(rng, fc, name + ".conv", in, out, k, stride, pad, bias, d));
  stack.push(std::make_unique<BatchNorm2dLayer<T>>(name + ".bn", out, d));
  stack.push(std::make_unique<ReluLayer<T>>(d));
}

template <typename T>
TapeVal add_vals(Tape<T>& tape, TapeVal a, TapeVal b) {
  if (a.is_complex())
    return TapeVal::complex(ops::add(tape, a.re, b.re), ops::add(tape, a.im, b.im));
  return TapeVal::real(ops::add(tape, a.re, b.re));
}

template <typename T>
TapeVal relu_val(Tape<T>& tape, TapeVal a) {
  if (a.is_complex())
    return TapeVal::complex(ops::relu(tape, a.re), ops::relu(tape, a.im));
  return TapeVal::real(ops::relu(tape, a.re));
}

template <typename T>
TapeVal concat_vals(Tape<T>& tape, TapeVal a, TapeVal b) {
  if (a.is_complex())
    return TapeVal::complex(ops::concat_channels(tape, a.re, b.re),
                            ops::concat_channels(tape, a.im, b.im));
  return TapeVal::real(ops::concat_channels(tape, a.re, b.re));
}

template <typename T>
TapeVal zero_like(Tape<T>& tape, TapeVal a) {
  Var re = tape.constant(Tensor<T>::zeros(tape.value(a.re).shape()));
  if (a.is_complex())
    return TapeVal::complex(re, tape.constant(Tensor<T>::zeros(tape.value(a.im).shape())));
  return TapeVal::real(re);
}

// Residual block with two 3x3 convolutions (ResNet18/34).
template <typename T>
class BasicBlock : public Layer<T> {
 public:
  BasicBlock(Rng& rng, FeatureCounter& fc, const std::string& name, int64_t in, int64_t planes,
             int64_t stride, Domain d)
      : bn1_(name + ".bn1", planes, d), bn2_(name + ".bn2", planes, d), relu_(d) {
    conv1_ = conv<T>(rng, fc, name + ".conv1", in, planes, 3, stride, 1, false, d);
    conv2_ = conv<T>(rng, fc, name + ".conv2", planes, planes, 3, 1, 1, false, d);
    if (stride != 1 || in != planes) {
      down_conv_ = conv<T>(rng, fc, name + ".down.conv", in, planes, 1, stride, 0, false, d);
      down_bn_ = std::make_unique<BatchNorm2dLayer<T>>(name + ".down.bn", planes, d);
    }
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
    TapeVal y = relu_.forward(tape, bn1_.forward(tape, conv1_->forward(tape, x, training), training), training);
    y = bn2_.forward(tape, conv2_->forward(tape, y, training), training);
    TapeVal skip = x;
    if (down_conv_)
      skip = down_bn_->forward(tape, down_conv_->forward(tape, x, training), training);
    return relu_val(tape, add_vals(tape, y, skip));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    conv1_->collect_params(out);
    bn1_.collect_params(out);
    conv2_->collect_params(out);
    bn2_.collect_params(out);
    if (down_conv_) {
      down_conv_->collect_params(out);
      down_bn_->collect_params(out);
    }
  }
  Domain domain() const override { return bn1_.domain(); }

 private:
  std::unique_ptr<Conv2dLayer<T>> conv1_, conv2_, down_conv_;
  BatchNorm2dLayer<T> bn1_, bn2_;
  std::unique_ptr<BatchNorm2dLayer<T>> down_bn_;
  ReluLayer<T> relu_;
};

// Bottleneck block (1x1 -> 3x3 -> 1x1, expansion 4) for ResNet50.
template <typename T>
class BottleneckBlock : public Layer<T> {
 public:
  static constexpr int64_t kExpansion = 4;

  BottleneckBlock(Rng& rng, FeatureCounter& fc, const std::string& name, int64_t in,
                  int64_t planes, int64_t stride, Domain d)
      : bn1_(name + ".bn1", planes, d),
        bn2_(name + ".bn2", planes, d),
        bn3_(name + ".bn3", planes * kExpansion, d),
        relu_(d) {
    conv1_ = conv<T>(rng, fc, name + ".conv1", in, planes, 1, 1, 0, false, d);
    conv2_ = conv<T>(rng, fc, name + ".conv2", planes, planes, 3, stride, 1, false, d);
    conv3_ = conv<T>(rng, fc, name + ".conv3", planes, planes * kExpansion, 1, 1, 0, false, d);
    if (stride != 1 || in != planes * kExpansion) {
      down_conv_ =
          conv<T>(rng, fc, name + ".down.conv", in, planes * kExpansion, 1, stride, 0, false, d);
      down_bn_ =
          std::make_unique<BatchNorm2dLayer<T>>(name + ".down.bn", planes * kExpansion, d);
    }
  }

  TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
    TapeVal y = relu_.forward(tape, bn1_.forward(tape, conv1_->forward(tape, x, training), training), training);
    y = relu_.forward(tape, bn2_.forward(tape, conv2_->forward(tape, y, training), training), training);
    y = bn3_.forward(tape, conv3_->forward(tape, y, training), training);
    TapeVal skip = x;
    if (down_conv_)
      skip = down_bn_->forward(tape, down_conv_->forward(tape, x, training), training);
    return relu_val(tape, add_vals(tape, y, skip));
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    conv1_->collect_params(out);
    bn1_.collect_params(out);
    conv2_->collect_params(out);
    bn2_.collect_params(out);
    conv3_->collect_params(out);
    bn3_.collect_params(out);
    if (down_conv_) {
      down_conv_->collect_params(out);
      down_bn_->collect_params(out);
    }
  }
  Domain domain() const override { return bn1_.domain(); }

 private:
  std::unique_ptr<Conv2dLayer<T>> conv1_, conv2_, conv3_, down_conv_;
  BatchNorm2dLayer<T> bn1_, bn2_, bn3_;
  std::unique_ptr<BatchNorm2dLayer<T>> down_bn_;
  ReluLayer<T> relu_;
};

template <typename T>
class ResNetModel : public Model<T> {
 public:
  ResNetModel(const ArchSpec& spec, const Variant& variant, uint64_t seed) {
    const Domain d = variant.kind == Variant::Kind::Complex ? Domain::Complex : Domain::Real;
    domain_ = d;
    proj_ = spec.head_projection();
    Rng rng(seed);
    FeatureCounter fc;
    const bool bottleneck = spec.family == ArchFamily::ResNet50;
    const int64_t expansion = bottleneck ? BottleneckBlock<T>::kExpansion : 1;
    const auto depth = spec.block_depth();
    std::vector<int64_t> widths;
    for (int64_t m : {1, 2, 4, 8}) widths.push_back(spec.stage_width(m));

    stem_conv_ = conv<T>(rng, fc, "stem.conv", spec.in_channels, widths[0], 7, 2, 3, false, d);
    stem_bn_ = std::make_unique<BatchNorm2dLayer<T>>("stem.bn", widths[0], d);
    stem_pool_ = std::make_unique<MaxPool2dLayer<T>>(3, 2, 1, d);
    relu_ = std::make_unique<ReluLayer<T>>(d);

    int64_t in_ch = widths[0];
    for (int stage = 0; stage < 4; ++stage) {
      const int64_t planes = widths[static_cast<size_t>(stage)];
      const int64_t stride = stage == 0 ? 1 : 2;
      for (int64_t i = 0; i < depth[static_cast<size_t>(stage)]; ++i) {
        const std::string name =
            "layer" + std::to_string(stage + 1) + "." + std::to_string(i);
        const int64_t s = i == 0 ? stride : 1;
        if (bottleneck)
          blocks_.push(std::make_unique<BottleneckBlock<T>>(rng, fc, name, in_ch, planes, s, d));
        else
          blocks_.push(std::make_unique<BasicBlock<T>>(rng, fc, name, in_ch, planes, s, d));
        in_ch = planes * expansion;
      }
    }
    pool_ = std::make_unique<GlobalAvgPoolLayer<T>>(d);
    fc.add(spec.num_classes);
    fc_ = std::make_unique<LinearLayer<T>>(rng, "fc", in_ch, spec.num_classes, d);

    this->meta.family = spec.family;
    this->meta.task = spec.task;
    this->meta.variant = variant;
    this->meta.head = proj_;
    this->meta.stage_features = widths;
    this->meta.total_features = fc.total;
    this->meta.trainable = this->trainable_count();
  }

  Var forward(Tape<T>& tape, Var input, bool training) override {
    TapeVal x = domain_ == Domain::Complex ? lift_complex(tape, input) : TapeVal::real(input);
    x = stem_conv_->forward(tape, x, training);
    x = stem_bn_->forward(tape, x, training);
    x = relu_->forward(tape, x, training);
    x = stem_pool_->forward(tape, x, training);
    x = blocks_.forward(tape, x, training);
    x = pool_->forward(tape, x, training);
    const auto& s = tape.value(x.re).shape();
    const Shape flat{s.dim(0), s.dim(1)};
    x = x.is_complex() ? TapeVal::complex(ops::reshape(tape, x.re, flat),
                                          ops::reshape(tape, x.im, flat))
                       : TapeVal::real(ops::reshape(tape, x.re, flat));
    x = fc_->forward(tape, x, training);
    return project_to_real(tape, x, proj_);
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    stem_conv_->collect_params(out);
    stem_bn_->collect_params(out);
    blocks_.collect_params(out);
    fc_->collect_params(out);
  }

 private:
  Domain domain_;
  HeadProjection proj_;
  std::unique_ptr<Conv2dLayer<T>> stem_conv_;
  std::unique_ptr<BatchNorm2dLayer<T>> stem_bn_;
  std::unique_ptr<MaxPool2dLayer<T>> stem_pool_;
  std::unique_ptr<ReluLayer<T>> relu_;
  LayerStack<T> blocks_;
  std::unique_ptr<GlobalAvgPoolLayer<T>> pool_;
  std::unique_ptr<LinearLayer<T>> fc_;
};

// Two conv3x3+BN+ReLU stages, the UNet building block.
template <typename T>
class DoubleConv : public Layer<T> {
 public:
  DoubleConv(Rng& rng, FeatureCounter& fc, const std::string& name, int64_t in, int64_t out,
             Domain d) {
    push_cbr(stack_, rng, fc, name + ".0", in, out, 3, 1, 1, false, d);
    push_cbr(stack_, rng, fc, name + ".1", out, out, 3, 1, 1, false, d);
  }
  TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
    return stack_.forward(tape, x, training);
  }
  void collect_params(std::vector<Parameter<T>*>& out) override { stack_.collect_params(out); }
  Domain domain() const override { return stack_.domain(); }

 private:
  LayerStack<T> stack_;
};

// Classic 4-level UNet with transposed-convolution upsampling.
template <typename T>
class UNetModel : public Model<T> {
 public:
  // Test hook: when >= 0, the skip at that level (0 = shallowest) is
  // zeroed during forward to confirm skips carry signal.
  int ablate_skip_level = -1;

  UNetModel(const ArchSpec& spec, const Variant& variant, uint64_t seed) {
    const Domain d = variant.kind == Variant::Kind::Complex ? Domain::Complex : Domain::Real;
    domain_ = d;
    proj_ = spec.head_projection();
    Rng rng(seed);
    FeatureCounter fc;
    for (int64_t m : {1, 2, 4, 8, 16}) widths_.push_back(spec.stage_width(m));

    int64_t in_ch = spec.in_channels;
    for (int i = 0; i < 4; ++i) {
      enc_.push_back(std::make_unique<DoubleConv<T>>(rng, fc, "enc" + std::to_string(i), in_ch,
                                                     widths_[static_cast<size_t>(i)], d));
      in_ch = widths_[static_cast<size_t>(i)];
    }
    pool_ = std::make_unique<MaxPool2dLayer<T>>(2, 2, 0, d);
    bottleneck_ = std::make_unique<DoubleConv<T>>(rng, fc, "bottleneck", widths_[3], widths_[4], d);
    for (int i = 3; i >= 0; --i) {
      const int64_t hi = widths_[static_cast<size_t>(i) + 1];
      const int64_t lo = widths_[static_cast<size_t>(i)];
      fc.add(lo);
      up_.push_back(std::make_unique<TransposedConv2x2Layer<T>>(
          rng, "up" + std::to_string(i) + ".tconv", hi, lo, d));
      dec_.push_back(std::make_unique<DoubleConv<T>>(rng, fc, "dec" + std::to_string(i), 2 * lo,
                                                     lo, d));
    }
    fc.add(spec.num_classes);
    head_ = conv<T>(rng, fc, "head", widths_[0], spec.num_classes, 1, 1, 0, true, d);

    this->meta.family = spec.family;
    this->meta.task = spec.task;
    this->meta.variant = variant;
    this->meta.head = proj_;
    this->meta.stage_features = widths_;
    this->meta.total_features = fc.total;
    this->meta.trainable = this->trainable_count();
  }

  Var forward(Tape<T>& tape, Var input, bool training) override {
    TapeVal x = domain_ == Domain::Complex ? lift_complex(tape, input) : TapeVal::real(input);
    std::vector<TapeVal> skips;
    for (int i = 0; i < 4; ++i) {
      x = enc_[static_cast<size_t>(i)]->forward(tape, x, training);
      skips.push_back(x);
      x = pool_->forward(tape, x, training);
    }
    x = bottleneck_->forward(tape, x, training);
    for (int i = 3; i >= 0; --i) {
      x = up_[static_cast<size_t>(3 - i)]->forward(tape, x, training);
      TapeVal skip = skips[static_cast<size_t>(i)];
      if (ablate_skip_level == i) skip = zero_like(tape, skip);
      x = concat_vals(tape, skip, x);
      x = dec_[static_cast<size_t>(3 - i)]->forward(tape, x, training);
    }
    x = head_->forward(tape, x, training);
    return project_to_real(tape, x, proj_);
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    for (auto& e : enc_) e->collect_params(out);
    bottleneck_->collect_params(out);
    for (size_t i = 0; i < up_.size(); ++i) {
      up_[i]->collect_params(out);
      dec_[i]->collect_params(out);
    }
    head_->collect_params(out);
  }

 private:
  Domain domain_;
  HeadProjection proj_;
  std::vector<int64_t> widths_;
  std::vector<std::unique_ptr<DoubleConv<T>>> enc_;
  std::unique_ptr<MaxPool2dLayer<T>> pool_;
  std::unique_ptr<DoubleConv<T>> bottleneck_;
  std::vector<std::unique_ptr<TransposedConv2x2Layer<T>>> up_;
  std::vector<std::unique_ptr<DoubleConv<T>>> dec_;
  std::unique_ptr<Conv2dLayer<T>> head_;
};

// Attention UNet: same encoder, decoder with upsample+conv blocks and an
// additive attention gate on every skip connection.
template <typename T>
class AttentionUNetModel : public Model<T> {
 public:
  int ablate_skip_level = -1;

  AttentionUNetModel(const ArchSpec& spec, const Variant& variant, uint64_t seed) {
    const Domain d = variant.kind == Variant::Kind::Complex ? Domain::Complex : Domain::Real;
    domain_ = d;
    proj_ = spec.head_projection();
    Rng rng(seed);
    FeatureCounter fc;
    for (int64_t m : {1, 2, 4, 8, 16}) widths_.push_back(spec.stage_width(m));

    int64_t in_ch = spec.in_channels;
    for (int i = 0; i < 4; ++i) {
      enc_.push_back(std::make_unique<DoubleConv<T>>(rng, fc, "enc" + std::to_string(i), in_ch,
                                                     widths_[static_cast<size_t>(i)], d));
      in_ch = widths_[static_cast<size_t>(i)];
    }
    pool_ = std::make_unique<MaxPool2dLayer<T>>(2, 2, 0, d);
    bottleneck_ = std::make_unique<DoubleConv<T>>(rng, fc, "bottleneck", widths_[3], widths_[4], d);
    upsample_ = std::make_unique<UpsampleNearestLayer<T>>(2, d);
    for (int i = 3; i >= 0; --i) {
      const int64_t hi = widths_[static_cast<size_t>(i) + 1];
      const int64_t lo = widths_[static_cast<size_t>(i)];
      auto up = std::make_unique<LayerStack<T>>();
      push_cbr(*up, rng, fc, "up" + std::to_string(i), hi, lo, 3, 1, 1, false, d);
      up_.push_back(std::move(up));
      const int64_t inter = lo / 2 > 0 ? lo / 2 : 1;
      gates_.push_back(std::make_unique<AttentionGate<T>>(rng, "gate" + std::to_string(i), lo,
                                                          lo, inter, d));
      // psi + the two 1x1 mappings contribute feature channels too
      fc.add(inter);
      fc.add(inter);
      fc.add(1);
      dec_.push_back(std::make_unique<DoubleConv<T>>(rng, fc, "dec" + std::to_string(i), 2 * lo,
                                                     lo, d));
    }
    fc.add(spec.num_classes);
    head_ = conv<T>(rng, fc, "head", widths_[0], spec.num_classes, 1, 1, 0, true, d);

    this->meta.family = spec.family;
    this->meta.task = spec.task;
    this->meta.variant = variant;
    this->meta.head = proj_;
    this->meta.stage_features = widths_;
    this->meta.total_features = fc.total;
    this->meta.trainable = this->trainable_count();
  }

  Var forward(Tape<T>& tape, Var input, bool training) override {
    TapeVal x = domain_ == Domain::Complex ? lift_complex(tape, input) : TapeVal::real(input);
    std::vector<TapeVal> skips;
    for (int i = 0; i < 4; ++i) {
      x = enc_[static_cast<size_t>(i)]->forward(tape, x, training);
      skips.push_back(x);
      x = pool_->forward(tape, x, training);
    }
    x = bottleneck_->forward(tape, x, training);
    for (int i = 3; i >= 0; --i) {
      x = upsample_->forward(tape, x, training);
      x = up_[static_cast<size_t>(3 - i)]->forward(tape, x, training);
      TapeVal skip = skips[static_cast<size_t>(i)];
      if (ablate_skip_level == i) skip = zero_like(tape, skip);
      TapeVal gated = gates_[static_cast<size_t>(3 - i)]->forward(tape, x, skip, training);
      x = concat_vals(tape, gated, x);
      x = dec_[static_cast<size_t>(3 - i)]->forward(tape, x, training);
    }
    x = head_->forward(tape, x, training);
    return project_to_real(tape, x, proj_);
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    for (auto& e : enc_) e->collect_params(out);
    bottleneck_->collect_params(out);
    for (size_t i = 0; i < up_.size(); ++i) {
      up_[i]->collect_params(out);
      gates_[i]->collect_params(out);
      dec_[i]->collect_params(out);
    }
    head_->collect_params(out);
  }

 private:
  Domain domain_;
  HeadProjection proj_;
  std::vector<int64_t> widths_;
  std::vector<std::unique_ptr<DoubleConv<T>>> enc_;
  std::unique_ptr<MaxPool2dLayer<T>> pool_;
  std::unique_ptr<DoubleConv<T>> bottleneck_;
  std::unique_ptr<UpsampleNearestLayer<T>> upsample_;
  std::vector<std::unique_ptr<LayerStack<T>>> up_;
  std::vector<std::unique_ptr<AttentionGate<T>>> gates_;
  std::vector<std::unique_ptr<DoubleConv<T>>> dec_;
  std::unique_ptr<Conv2dLayer<T>> head_;
};

// Encoder / residual-core / decoder segmentation network: 7x7 stem, two
// strided-conv downsamplings, N residual blocks, mirrored upsampling
// decoder, 7x7 output head.
template <typename T>
class ReconResNetModel : public Model<T> {
 public:
  ReconResNetModel(const ArchSpec& spec, const Variant& variant, uint64_t seed) {
    const Domain d = variant.kind == Variant::Kind::Complex ? Domain::Complex : Domain::Real;
    domain_ = d;
    proj_ = spec.head_projection();
    Rng rng(seed);
    FeatureCounter fc;
    for (int64_t m : {1, 2, 4}) widths_.push_back(spec.stage_width(m));
    const int64_t n_res = spec.block_depth()[0];

    push_cbr(stem_, rng, fc, "stem", spec.in_channels, widths_[0], 7, 1, 3, true, d);
    push_cbr(stem_, rng, fc, "down0", widths_[0], widths_[1], 3, 2, 1, true, d);
    push_cbr(stem_, rng, fc, "down1", widths_[1], widths_[2], 3, 2, 1, true, d);
    for (int64_t i = 0; i < n_res; ++i)
      res_.push_back(
          std::make_unique<ResBlock>(rng, fc, "res" + std::to_string(i), widths_[2], d));
    decoder_.push(std::make_unique<UpsampleNearestLayer<T>>(2, d));
    push_cbr(decoder_, rng, fc, "up0", widths_[2], widths_[1], 3, 1, 1, true, d);
    decoder_.push(std::make_unique<UpsampleNearestLayer<T>>(2, d));
    push_cbr(decoder_, rng, fc, "up1", widths_[1], widths_[0], 3, 1, 1, true, d);
    fc.add(spec.num_classes);
    head_ = conv<T>(rng, fc, "head", widths_[0], spec.num_classes, 7, 1, 3, true, d);

    this->meta.family = spec.family;
    this->meta.task = spec.task;
    this->meta.variant = variant;
    this->meta.head = proj_;
    this->meta.stage_features = widths_;
    this->meta.total_features = fc.total;
    this->meta.trainable = this->trainable_count();
  }

  Var forward(Tape<T>& tape, Var input, bool training) override {
    TapeVal x = domain_ == Domain::Complex ? lift_complex(tape, input) : TapeVal::real(input);
    x = stem_.forward(tape, x, training);
    for (auto& r : res_) x = r->forward(tape, x, training);
    x = decoder_.forward(tape, x, training);
    x = head_->forward(tape, x, training);
    return project_to_real(tape, x, proj_);
  }

  void collect_params(std::vector<Parameter<T>*>& out) override {
    stem_.collect_params(out);
    for (auto& r : res_) r->collect_params(out);
    decoder_.collect_params(out);
    head_->collect_params(out);
  }

 private:
  class ResBlock : public Layer<T> {
   public:
    ResBlock(Rng& rng, FeatureCounter& fc, const std::string& name, int64_t ch, Domain d)
        : bn2_(name + ".bn2", ch, d) {
      push_cbr(first_, rng, fc, name + ".0", ch, ch, 3, 1, 1, true, d);
      conv2_ = conv<T>(rng, fc, name + ".1.conv", ch, ch, 3, 1, 1, true, d);
    }
    TapeVal forward(Tape<T>& tape, TapeVal x, bool training) override {
      TapeVal y = first_.forward(tape, x, training);
      y = bn2_.forward(tape, conv2_->forward(tape, y, training), training);
      return add_vals(tape, y, x);
    }
    void collect_params(std::vector<Parameter<T>*>& out) override {
      first_.collect_params(out);
      conv2_->collect_params(out);
      bn2_.collect_params(out);
    }
    Domain domain() const override { return bn2_.domain(); }

   private:
    LayerStack<T> first_;
    std::unique_ptr<Conv2dLayer<T>> conv2_;
    BatchNorm2dLayer<T> bn2_;
  };

  Domain domain_;
  HeadProjection proj_;
  std::vector<int64_t> widths_;
  LayerStack<T> stem_;
  std::vector<std::unique_ptr<ResBlock>> res_;
  LayerStack<T> decoder_;
  std::unique_ptr<Conv2dLayer<T>> head_;
};

}  // namespace build_detail

// Builds a model deterministically from (spec, variant, seed). The
// widened variant's achieved parameter ratio is verified against the
// requested multiplier with a 3% tolerance.
template <typename T>
ModelHandle<T> build(const ArchSpec& spec, const Variant& variant, uint64_t seed) {
  spec.validate();
  ArchSpec eff = spec;
  if (variant.kind == Variant::Kind::WidenedReal)
    eff = widen(spec, variant.param_multiplier, variant.literal_channels);

  auto make = [&](const ArchSpec& s, const Variant& v) -> ModelHandle<T> {
    switch (s.family) {
      case ArchFamily::ResNet18:
      case ArchFamily::ResNet34:
      case ArchFamily::ResNet50:
        return std::make_unique<build_detail::ResNetModel<T>>(s, v, seed);
      case ArchFamily::UNet:
        return std::make_unique<build_detail::UNetModel<T>>(s, v, seed);
      case ArchFamily::AttentionUNet:
        return std::make_unique<build_detail::AttentionUNetModel<T>>(s, v, seed);
      case ArchFamily::ReconResNet:
        return std::make_unique<build_detail::ReconResNetModel<T>>(s, v, seed);
    }
    throw SpecError("unknown architecture family");
  };

  ModelHandle<T> model = make(eff, variant);

  if (variant.kind == Variant::Kind::WidenedReal && !variant.literal_channels) {
    ModelHandle<T> reference = make(spec, Variant::real());
    const double achieved = static_cast<double>(model->meta.trainable) /
                            static_cast<double>(reference->meta.trainable);
    const double target = variant.param_multiplier;
    if (std::abs(achieved / target - 1.0) > 0.03)
      throw WideningError("widening achieved parameter ratio " + std::to_string(achieved) +
                          ", wanted " + std::to_string(target) + " within 3%");
  }
  return model;
}

struct ParamCountReport {
  int64_t features = 0;
  int64_t trainable = 0;
};

template <typename T>
ParamCountReport count_parameters(Model<T>& m) {
  return ParamCountReport{m.meta.total_features, m.trainable_count()};
}

}  // namespace cxnn
