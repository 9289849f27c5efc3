#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "cxnn/data.hpp"
#include "cxnn/losses.hpp"
#include "cxnn/metrics.hpp"
#include "cxnn/models.hpp"
#include "cxnn/optim.hpp"

namespace cxnn {

struct TrainConfig {
  int64_t epochs = 80;
  int64_t batch_size = 64;
  double lr = 1e-4;
  int64_t folds = 5;
  uint64_t seed = 42;
  bool augment = true;
  uint32_t augment_kinds = kAugAll;
  int jobs = 1;
};

struct FoldResult {
  bool failed = false;  // loss diverged (NaN); surfaced, not fatal
  double metric1 = 0.0;  // f1 or dice
  double metric2 = 0.0;  // accuracy or iou
};

struct VariantReport {
  std::string model_name;
  std::string type_label;  // CNN / CNNx2 / CV-CNN
  std::vector<FoldResult> folds;
  double mean1 = 0.0, std1 = 0.0;
  double mean2 = 0.0, std2 = 0.0;
  int64_t trainable = 0;
  int64_t features = 0;
};

struct MetricReport {
  TaskKind task = TaskKind::Classification;
  std::string metric1_name = "F1";
  std::string metric2_name = "Accuracy";
  std::vector<VariantReport> rows;
};

// Mean and population standard deviation over the successful folds.
inline void aggregate_folds(VariantReport& row) {
  double s1 = 0, s2 = 0;
  int64_t n = 0;
  for (const auto& f : row.folds) {
    if (f.failed) continue;
    s1 += f.metric1;
    s2 += f.metric2;
    ++n;
  }
  if (n == 0) {
    row.mean1 = row.std1 = row.mean2 = row.std2 = 0.0;
    return;
  }
  row.mean1 = s1 / static_cast<double>(n);
  row.mean2 = s2 / static_cast<double>(n);
  double v1 = 0, v2 = 0;
  for (const auto& f : row.folds) {
    if (f.failed) continue;
    v1 += (f.metric1 - row.mean1) * (f.metric1 - row.mean1);
    v2 += (f.metric2 - row.mean2) * (f.metric2 - row.mean2);
  }
  row.std1 = std::sqrt(v1 / static_cast<double>(n));
  row.std2 = std::sqrt(v2 / static_cast<double>(n));
}

namespace train_detail {

template <typename T>
Tensor<T> to_precision(const Tensor<float>& t) {
  Tensor<T> out(t.shape());
  for (int64_t i = 0; i < t.size(); ++i) out[i] = static_cast<T>(t[i]);
  return out;
}

// Stacks dataset samples into one [B, 1, H, W] batch.
template <typename T>
Tensor<T> stack_images(const std::vector<Sample>& data, const std::vector<int64_t>& idx,
                       size_t begin, size_t end) {
  const auto& s0 = data[static_cast<size_t>(idx[begin])].image.shape();
  const int64_t h = s0.dim(1), w = s0.dim(2);
  Tensor<T> batch(Shape{static_cast<int64_t>(end - begin), 1, h, w});
  for (size_t i = begin; i < end; ++i) {
    const auto& img = data[static_cast<size_t>(idx[i])].image;
    for (int64_t j = 0; j < img.size(); ++j)
      batch[static_cast<int64_t>(i - begin) * img.size() + j] = static_cast<T>(img[j]);
  }
  return batch;
}

template <typename T>
Tensor<T> stack_masks(const std::vector<Sample>& data, const std::vector<int64_t>& idx,
                      size_t begin, size_t end) {
  const auto& s0 = data[static_cast<size_t>(idx[begin])].mask.shape();
  const int64_t h = s0.dim(1), w = s0.dim(2);
  Tensor<T> batch(Shape{static_cast<int64_t>(end - begin), 1, h, w});
  for (size_t i = begin; i < end; ++i) {
    const auto& m = data[static_cast<size_t>(idx[i])].mask;
    for (int64_t j = 0; j < m.size(); ++j)
      batch[static_cast<int64_t>(i - begin) * m.size() + j] = static_cast<T>(m[j]);
  }
  return batch;
}

}  // namespace train_detail

// Per-epoch hook; returning false stops training early (used by the
// sanity-floor checks which only need "reached within N epochs").
using EpochCallback = std::function<bool(int64_t epoch)>;

// Trains in place over the index subset. Returns false when the loss
// diverged (non-finite); the caller records the fold as failed.
template <typename T>
bool train_model(Model<T>& model, const std::vector<Sample>& data,
                 const std::vector<int64_t>& train_idx, TaskKind task, const TrainConfig& cfg,
                 uint64_t stream_tag, const EpochCallback& on_epoch = nullptr) {
  typename Adam<T>::Config acfg;
  acfg.lr = static_cast<T>(cfg.lr);
  Adam<T> opt(acfg);
  auto params = model.parameters();
  zero_grads(params);

  std::vector<int64_t> order = train_idx;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(cfg.seed, {stream_tag, 0x73687566ULL, static_cast<uint64_t>(epoch)});
    shuffle_rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      if (stop - start < 2) break;  // batch norm needs >= 2 in training mode
      std::vector<Sample> staging;
      std::vector<int64_t> local;
      std::vector<int> labels;
      if (cfg.augment) {
        staging.reserve(stop - start);
        for (size_t i = start; i < stop; ++i) {
          Rng arng = Rng::stream(cfg.seed, {stream_tag, 0x617567ULL, static_cast<uint64_t>(epoch),
                                            static_cast<uint64_t>(order[i])});
          staging.push_back(augment(data[static_cast<size_t>(order[i])], cfg.augment_kinds, arng));
          local.push_back(static_cast<int64_t>(staging.size()) - 1);
        }
      }
      const std::vector<Sample>& src = cfg.augment ? staging : data;
      const std::vector<int64_t>& sel = cfg.augment ? local : order;
      const size_t b0 = cfg.augment ? 0 : start;
      const size_t b1 = cfg.augment ? staging.size() : stop;

      Tape<T> tape;
      Var input = tape.constant(train_detail::stack_images<T>(src, sel, b0, b1));
      Var scores = model.forward(tape, input, true);
      Var loss;
      if (task == TaskKind::Classification) {
        labels.clear();
        for (size_t i = b0; i < b1; ++i)
          labels.push_back(src[static_cast<size_t>(sel[i])].label);
        loss = ops::cross_entropy(tape, scores, labels);
      } else {
        loss = ops::dice_loss(tape, scores, train_detail::stack_masks<T>(src, sel, b0, b1));
      }
      const T loss_value = tape.value(loss)[0];
      if (!std::isfinite(static_cast<double>(loss_value))) return false;
      tape.backward(loss);
      opt.step(params);
      zero_grads(params);
    }
    if (on_epoch && !on_epoch(epoch)) break;
  }
  return true;
}

// Evaluates on the index subset in eval mode.
template <typename T>
FoldResult evaluate_model(Model<T>& model, const std::vector<Sample>& data,
                          const std::vector<int64_t>& idx, TaskKind task, int64_t batch_size) {
  FoldResult r;
  if (task == TaskKind::Classification) {
    std::vector<int> pred, truth;
    int max_label = 0;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
      const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
      Tape<T> tape;
      Var input = tape.constant(train_detail::stack_images<T>(data, idx, start, stop));
      Var scores = model.forward(tape, input, false);
      const auto& v = tape.value(scores);
      const int64_t k = v.shape().dim(1);
      for (size_t i = start; i < stop; ++i) {
        const T* row = v.data() + static_cast<int64_t>(i - start) * k;
        int best = 0;
        for (int64_t j = 1; j < k; ++j)
          if (row[j] > row[best]) best = static_cast<int>(j);
        pred.push_back(best);
        truth.push_back(data[static_cast<size_t>(idx[i])].label);
        max_label = std::max(max_label, truth.back());
      }
      max_label = std::max<int>(max_label, static_cast<int>(k) - 1);
    }
    const auto m = classification_metrics(pred, truth, max_label + 1);
    r.metric1 = m.f1;
    r.metric2 = m.accuracy;
    return r;
  }
  // Segmentation: per-sample Dice/IoU at threshold 0.5, averaged.
  double dice_sum = 0.0, iou_sum = 0.0;
  for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
    Tape<T> tape;
    Var input = tape.constant(train_detail::stack_images<T>(data, idx, start, stop));
    Var scores = model.forward(tape, input, false);
    const auto& v = tape.value(scores);
    const int64_t n = v.size() / static_cast<int64_t>(stop - start);
    for (size_t i = start; i < stop; ++i) {
      const T* row = v.data() + static_cast<int64_t>(i - start) * n;
      const auto& truth_mask = data[static_cast<size_t>(idx[i])].mask;
      Tensor<T> pred_mask(truth_mask.shape());
      for (int64_t j = 0; j < n; ++j) pred_mask[j] = row[j] > T(0) ? T(1) : T(0);
      Tensor<T> tm(truth_mask.shape());
      for (int64_t j = 0; j < n; ++j) tm[j] = static_cast<T>(truth_mask[j]);
      const auto m = segmentation_metrics(pred_mask, tm);
      dice_sum += m.dice;
      iou_sum += m.iou;
    }
  }
  r.metric1 = dice_sum / static_cast<double>(idx.size());
  r.metric2 = iou_sum / static_cast<double>(idx.size());
  return r;
}

inline uint64_t splitmix_combine(uint64_t seed, uint64_t tag) {
  uint64_t s = seed ^ (tag + 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

// Hook invoked after each fold finishes (checkpointing etc.).
template <typename T>
using FoldCallback = std::function<void(size_t variant_idx, int64_t fold, Model<T>& model)>;

// The cross-validation protocol: for each variant, train a fresh
// seed-derived model on each fold's training split and evaluate on the
// held-out fold. Folds may run on parallel worker threads; results only
// depend on (spec, variants, data, config), never on scheduling.
template <typename T>
MetricReport run_experiment(const ArchSpec& arch, const std::vector<Variant>& variants,
                            const std::vector<Sample>& data, const TrainConfig& cfg,
                            const FoldCallback<T>& on_fold = nullptr) {
  MetricReport report;
  report.task = arch.task;
  if (arch.task == TaskKind::Segmentation) {
    report.metric1_name = "Dice";
    report.metric2_name = "IoU";
  }
  const auto folds = kfold_split(static_cast<int64_t>(data.size()), cfg.folds, cfg.seed);

  for (size_t vi = 0; vi < variants.size(); ++vi) {
    VariantReport row;
    row.model_name = family_name(arch.family);
    row.type_label = variants[vi].label();
    row.folds.resize(folds.size());

    auto run_fold = [&](int64_t f) {
      const uint64_t stream_tag = (static_cast<uint64_t>(vi) << 32) | static_cast<uint64_t>(f);
      ModelHandle<T> model =
          build<T>(arch, variants[vi], splitmix_combine(cfg.seed, stream_tag));
      const bool ok = train_model(*model, data, folds[static_cast<size_t>(f)].first, arch.task,
                                  cfg, stream_tag);
      if (!ok) {
        row.folds[static_cast<size_t>(f)].failed = true;
      } else {
        row.folds[static_cast<size_t>(f)] = evaluate_model(
            *model, data, folds[static_cast<size_t>(f)].second, arch.task, cfg.batch_size);
      }
      if (on_fold) on_fold(vi, f, *model);
    };

    if (cfg.jobs > 1) {
      std::vector<std::thread> workers;
      for (int64_t f = 0; f < static_cast<int64_t>(folds.size()); ++f) {
        workers.emplace_back(run_fold, f);
        if (static_cast<int>(workers.size()) == cfg.jobs ||
            f + 1 == static_cast<int64_t>(folds.size())) {
          for (auto& th : workers) th.join();
          workers.clear();
        }
      }
    } else {
      for (int64_t f = 0; f < static_cast<int64_t>(folds.size()); ++f) run_fold(f);
    }

    ModelHandle<T> probe = build<T>(arch, variants[vi], cfg.seed);
    row.trainable = probe->meta.trainable;
    row.features = probe->meta.total_features;
    aggregate_folds(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace cxnn
