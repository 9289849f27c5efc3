#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxnn/error.hpp"
#include "cxnn/rng.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn {

struct ClassificationMetrics {
  double f1 = 0.0;        // macro-averaged over classes
  double accuracy = 0.0;
};

// Macro F1 and accuracy from predicted and true labels in [0, K). A
// class that never appears in predictions or ground truth contributes an
// F1 of zero to the macro average.
inline ClassificationMetrics classification_metrics(const std::vector<int>& pred,
                                                    const std::vector<int>& truth, int k) {
  if (pred.size() != truth.size())
    throw ShapeError("classification_metrics: prediction/truth length mismatch");
  if (pred.empty()) throw ContractError("classification_metrics: empty input");
  const size_t n = pred.size();
  std::vector<int64_t> tp(static_cast<size_t>(k), 0), fp(static_cast<size_t>(k), 0),
      fn(static_cast<size_t>(k), 0);
  int64_t correct = 0;
  for (size_t i = 0; i < n; ++i) {
    const int p = pred[i], t = truth[i];
    if (p < 0 || p >= k || t < 0 || t >= k)
      throw ContractError("classification_metrics: label out of range");
    if (p == t) {
      ++correct;
      ++tp[static_cast<size_t>(p)];
    } else {
      ++fp[static_cast<size_t>(p)];
      ++fn[static_cast<size_t>(t)];
    }
  }
  double f1_sum = 0.0;
  for (int c = 0; c < k; ++c) {
    const double denom =
        2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) +
        static_cast<double>(fp[static_cast<size_t>(c)] + fn[static_cast<size_t>(c)]);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[static_cast<size_t>(c)]) / denom : 0.0;
  }
  return {f1_sum / static_cast<double>(k),
          static_cast<double>(correct) / static_cast<double>(n)};
}

struct SegmentationMetrics {
  double dice = 0.0;
  double iou = 0.0;
};

// Dice and IoU of two binary masks; both metrics are 1 when both masks
// are empty. iou = dice / (2 - dice) holds identically.
template <typename T>
SegmentationMetrics segmentation_metrics(const Tensor<T>& pred, const Tensor<T>& truth) {
  check_same_shape(pred, truth, "segmentation_metrics");
  int64_t inter = 0, a = 0, b = 0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != T(0), t = truth[i] != T(0);
    inter += p && t;
    a += p;
    b += t;
  }
  if (a + b == 0) return {1.0, 1.0};
  const double dice = 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
  const int64_t uni = a + b - inter;
  const double iou = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  return {dice, iou};
}

// Pixel-wise set differences between a predicted and a true mask:
// tp = both on, under = truth missed by the prediction, over = predicted
// but not true. These are the counts the mask-export summary reports.
struct MaskDiffCounts {
  int64_t tp = 0;
  int64_t under = 0;
  int64_t over = 0;
};

template <typename T>
MaskDiffCounts mask_diff_counts(const Tensor<T>& pred, const Tensor<T>& truth) {
  check_same_shape(pred, truth, "mask_diff_counts");
  MaskDiffCounts c;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != T(0), t = truth[i] != T(0);
    c.tp += p && t;
    c.under += !p && t;
    c.over += p && !t;
  }
  return c;
}

// Seed-deterministic k-fold partition of [0, n). Test folds are pairwise
// disjoint, cover every index, and differ in size by at most one (the
// first n % k folds take the extra element).
inline std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> kfold_split(
    int64_t n, int64_t k, uint64_t seed) {
  if (k < 2) throw ContractError("kfold_split: k must be >= 2");
  if (n < k) throw ContractError("kfold_split: need n >= k");
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = Rng::stream(seed, {0x6b666f6c64ULL});  // "kfold"
  rng.shuffle(order);

  std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> folds;
  int64_t start = 0;
  for (int64_t f = 0; f < k; ++f) {
    const int64_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<int64_t> test(order.begin() + start, order.begin() + start + size);
    std::vector<int64_t> train;
    train.reserve(static_cast<size_t>(n - size));
    train.insert(train.end(), order.begin(), order.begin() + start);
    train.insert(train.end(), order.begin() + start + size, order.end());
    folds.emplace_back(std::move(train), std::move(test));
    start += size;
  }
  return folds;
}

}  // namespace cxnn
