#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cxnn/error.hpp"
#include "cxnn/models.hpp"
#include "cxnn/rng.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn {

// Synthetic phantom dataset: Gaussian blobs on a smooth textured
// background with additive noise. Classification mirrors the 3-class
// structure {no blob, small/dim blob, large/bright blob}; segmentation
// uses the blob support thresholded at half of its peak as the binary
// mask. Everything is a pure function of (spec, seed).
struct DatasetSpec {
  TaskKind task = TaskKind::Classification;
  int64_t samples_per_class = 300;  // segmentation: total = 3 * samples_per_class
  int64_t height = 64, width = 64;
  double noise_level = 0.05;
  uint64_t seed = 42;

  void validate() const {
    if (samples_per_class < 1) throw SpecError("dataset: samples_per_class must be >= 1");
    if (height < 32 || width < 32)
      throw SpecError("dataset: image size too small for the blob scale (min 32)");
    if (noise_level < 0) throw SpecError("dataset: noise level must be >= 0");
  }
};

struct Sample {
  Tensor<float> image;  // [1, H, W], values in [0,1] before augmentation
  int label = 0;
  Tensor<float> mask;   // [1, H, W] binary; empty for classification
};

// Min-max rescale to [0, 1]; constant images map to all zeros.
template <typename T>
Tensor<T> normalize(const Tensor<T>& image) {
  T lo = image[0], hi = image[0];
  for (int64_t i = 0; i < image.size(); ++i) {
    lo = std::min(lo, image[i]);
    hi = std::max(hi, image[i]);
  }
  Tensor<T> out(image.shape());
  const T span = hi - lo;
  if (span <= T(0)) return out;
  for (int64_t i = 0; i < image.size(); ++i) out[i] = (image[i] - lo) / span;
  return out;
}

namespace data_detail {

struct Blob {
  double cy, cx, sigma, amp;
};

inline void render(Tensor<float>& img, Tensor<float>& blob_field, int64_t h, int64_t w,
                   const std::vector<Blob>& blobs, double noise, Rng& rng) {
  // Smooth background texture: three low-frequency cosine waves.
  double fy[3], fx[3], ph[3];
  for (int i = 0; i < 3; ++i) {
    fy[i] = rng.uniform(0.5, 2.0);
    fx[i] = rng.uniform(0.5, 2.0);
    ph[i] = rng.uniform(0.0, 2.0 * kPi);
  }
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double v = 0.35;
      for (int i = 0; i < 3; ++i)
        v += 0.05 * std::cos(2.0 * kPi * (fy[i] * static_cast<double>(y) / static_cast<double>(h) +
                                          fx[i] * static_cast<double>(x) / static_cast<double>(w)) +
                             ph[i]);
      double b = 0.0;
      for (const Blob& bl : blobs) {
        const double dy = static_cast<double>(y) - bl.cy;
        const double dx = static_cast<double>(x) - bl.cx;
        b += bl.amp * std::exp(-(dy * dy + dx * dx) / (2.0 * bl.sigma * bl.sigma));
      }
      blob_field[y * w + x] = static_cast<float>(b);
      img[y * w + x] = static_cast<float>(v + b + noise * rng.normal());
    }
}

// cls 1: small/dim, cls 2: large/bright, cls 0: none. kSegMix draws a
// mid-range blob whose half-max support stays clearly observable against
// the background texture.
constexpr int kSegMix = 3;

inline std::vector<Blob> make_blobs(Rng& rng, int cls, int64_t h, int64_t w) {
  if (cls == 0) return {};
  const int n = cls == kSegMix ? 1 + static_cast<int>(rng.below(2))
                               : 1 + static_cast<int>(rng.below(3));
  std::vector<Blob> blobs;
  for (int i = 0; i < n; ++i) {
    Blob b;
    b.cy = rng.uniform(0.25, 0.75) * static_cast<double>(h);
    b.cx = rng.uniform(0.25, 0.75) * static_cast<double>(w);
    if (cls == 1) {
      b.sigma = rng.uniform(2.5, 4.5);
      b.amp = rng.uniform(0.25, 0.40);
    } else if (cls == 2) {
      b.sigma = rng.uniform(7.0, 11.0);
      b.amp = rng.uniform(0.60, 0.85);
    } else {
      b.sigma = rng.uniform(5.0, 9.0);
      b.amp = rng.uniform(0.50, 0.85);
    }
    blobs.push_back(b);
  }
  return blobs;
}

}  // namespace data_detail

namespace data_detail {

inline Sample make_sample(const DatasetSpec& spec, int cls, uint64_t cls_stream, uint64_t index) {
  const int64_t h = spec.height, w = spec.width;
  Rng rng = Rng::stream(spec.seed, {cls_stream, index});
  const int blob_cls = spec.task == TaskKind::Classification ? cls : kSegMix;
  const auto blobs = make_blobs(rng, blob_cls, h, w);
  Sample s;
  s.image = Tensor<float>(Shape{1, h, w});
  Tensor<float> field(Shape{1, h, w});
  render(s.image, field, h, w, blobs, spec.noise_level, rng);
  s.image = normalize(s.image);
  s.label = cls;
  if (spec.task == TaskKind::Segmentation) {
    // Mask = blob support at half of the peak height.
    float peak = 0.f;
    for (int64_t j = 0; j < field.size(); ++j) peak = std::max(peak, field[j]);
    s.mask = Tensor<float>(Shape{1, h, w});
    if (peak > 0.f)
      for (int64_t j = 0; j < field.size(); ++j)
        s.mask[j] = field[j] >= 0.5f * peak ? 1.f : 0.f;
  }
  return s;
}

}  // namespace data_detail

inline std::vector<Sample> generate(const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> samples;
  if (spec.task == TaskKind::Classification) {
    for (int cls = 0; cls < 3; ++cls)
      for (int64_t i = 0; i < spec.samples_per_class; ++i)
        samples.push_back(data_detail::make_sample(spec, cls, static_cast<uint64_t>(cls),
                                                   static_cast<uint64_t>(i)));
  } else {
    for (int64_t i = 0; i < 3 * spec.samples_per_class; ++i)
      samples.push_back(data_detail::make_sample(spec, 0, 0, static_cast<uint64_t>(i)));
  }
  return samples;
}

// Augmentation kinds, combinable as a bitmask.
enum AugmentKind : uint32_t {
  kAugFlipH = 1u << 0,
  kAugFlipV = 1u << 1,
  kAugRotate = 1u << 2,     // rotation in [-15, +15] degrees
  kAugAffine = 1u << 3,     // uniform scale in [0.9, 1.1]
  kAugBiasField = 1u << 4,  // low-order polynomial multiplicative field
  kAugNoise = 1u << 5,      // additive Gaussian
  kAugGamma = 1u << 6,      // exponent in [0.7, 1.5]
  kAugGhosting = 1u << 7,   // periodic low-amplitude copies along one axis
  kAugSpatial = kAugFlipH | kAugFlipV | kAugRotate | kAugAffine,
  kAugIntensity = kAugBiasField | kAugNoise | kAugGamma | kAugGhosting,
  kAugAll = kAugSpatial | kAugIntensity,
};

namespace data_detail {

inline float sample_bilinear(const Tensor<float>& img, int64_t h, int64_t w, double y, double x) {
  const int64_t y0 = static_cast<int64_t>(std::floor(y));
  const int64_t x0 = static_cast<int64_t>(std::floor(x));
  const double dy = y - static_cast<double>(y0);
  const double dx = x - static_cast<double>(x0);
  auto px = [&](int64_t yy, int64_t xx) -> double {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return static_cast<double>(img[yy * w + xx]);
  };
  return static_cast<float>((1 - dy) * ((1 - dx) * px(y0, x0) + dx * px(y0, x0 + 1)) +
                            dy * ((1 - dx) * px(y0 + 1, x0) + dx * px(y0 + 1, x0 + 1)));
}

inline float sample_nearest(const Tensor<float>& img, int64_t h, int64_t w, double y, double x) {
  const int64_t yy = static_cast<int64_t>(std::llround(y));
  const int64_t xx = static_cast<int64_t>(std::llround(x));
  if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.f;
  return img[yy * w + xx];
}

}  // namespace data_detail

// Applies a random subset of the enabled augmentation kinds. Spatial
// transforms hit image and mask through the same inverse map (bilinear
// for the image, nearest for the mask so it stays binary); intensity
// transforms touch the image only.
inline Sample augment(const Sample& in, uint32_t kind_mask, Rng& rng) {
  const int64_t h = in.image.shape().dim(1), w = in.image.shape().dim(2);
  Sample out = in;

  auto enabled = [&](uint32_t kind) { return (kind_mask & kind) != 0 && rng.coin(); };

  // Spatial pass: compose flip/rotate/scale into one affine inverse map
  // about the image center.
  const bool flip_h = enabled(kAugFlipH);
  const bool flip_v = enabled(kAugFlipV);
  const double angle = enabled(kAugRotate) ? rng.uniform(-15.0, 15.0) * kPi / 180.0 : 0.0;
  const double zoom = enabled(kAugAffine) ? rng.uniform(0.9, 1.1) : 1.0;
  if (flip_h || flip_v || angle != 0.0 || zoom != 1.0) {
    const double cy = static_cast<double>(h - 1) / 2.0, cx = static_cast<double>(w - 1) / 2.0;
    const double ca = std::cos(angle), sa = std::sin(angle);
    Tensor<float> img(in.image.shape());
    Tensor<float> msk = in.mask.empty() ? Tensor<float>() : Tensor<float>(in.mask.shape());
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double sy = static_cast<double>(y), sx = static_cast<double>(x);
        if (flip_h) sx = static_cast<double>(w - 1) - sx;
        if (flip_v) sy = static_cast<double>(h - 1) - sy;
        // Inverse rotation+scale about the center.
        const double ry = (sy - cy) / zoom, rx = (sx - cx) / zoom;
        const double oy = ca * ry + sa * rx + cy;
        const double ox = -sa * ry + ca * rx + cx;
        img[y * w + x] = data_detail::sample_bilinear(out.image, h, w, oy, ox);
        if (!msk.empty()) msk[y * w + x] = data_detail::sample_nearest(out.mask, h, w, oy, ox);
      }
    out.image = std::move(img);
    if (!out.mask.empty()) out.mask = std::move(msk);
  }

  if (enabled(kAugBiasField)) {
    // Multiplicative second-order polynomial field around 1.
    double c[5];
    for (double& v : c) v = rng.uniform(-0.15, 0.15);
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const double u = 2.0 * static_cast<double>(x) / static_cast<double>(w - 1) - 1.0;
        const double v = 2.0 * static_cast<double>(y) / static_cast<double>(h - 1) - 1.0;
        const double field = 1.0 + c[0] * u + c[1] * v + c[2] * u * v + c[3] * u * u + c[4] * v * v;
        out.image[y * w + x] = static_cast<float>(out.image[y * w + x] * field);
      }
  }

  if (enabled(kAugGamma)) {
    const double gamma = rng.uniform(0.7, 1.5);
    for (int64_t i = 0; i < out.image.size(); ++i) {
      const float v = out.image[i];
      out.image[i] = v > 0.f ? std::pow(v, static_cast<float>(gamma)) : 0.f;
    }
  }

  if (enabled(kAugNoise)) {
    const double sigma = rng.uniform(0.01, 0.05);
    for (int64_t i = 0; i < out.image.size(); ++i)
      out.image[i] += static_cast<float>(sigma * rng.normal());
  }

  if (enabled(kAugGhosting)) {
    // Shifted low-amplitude copies along one axis, spaced periodically.
    const bool along_y = rng.coin();
    const int64_t period = 4 + static_cast<int64_t>(rng.below(5));
    const double amp = rng.uniform(0.03, 0.08);
    const Tensor<float> src = out.image;
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const int64_t sy = along_y ? (y + period) % h : y;
        const int64_t sx = along_y ? x : (x + period) % w;
        out.image[y * w + x] += static_cast<float>(amp) * src[sy * w + sx];
      }
  }

  return out;
}

}  // namespace cxnn
