#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cxnn/autodiff.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn::ops {

// Mean cross-entropy of softmax(scores) against integer labels,
// stabilized by max subtraction. scores: [B, K], K >= 2.
template <typename T>
Var cross_entropy(Tape<T>& tape, Var scores, const std::vector<int>& labels) {
  const auto& v = tape.value(scores);
  if (v.shape().ndim() != 2) throw ShapeError("cross_entropy expects scores [B,K]");
  const int64_t b = v.shape().dim(0), k = v.shape().dim(1);
  if (k < 2) throw ContractError("cross_entropy: need at least 2 classes");
  if (static_cast<int64_t>(labels.size()) != b)
    throw ContractError("cross_entropy: label count does not match batch");
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw ContractError("cross_entropy: label " + std::to_string(lab) + " out of range [0," +
                          std::to_string(k) + ")");

  Tensor<T> probs(v.shape());
  T loss = T(0);
  for (int64_t i = 0; i < b; ++i) {
    const T* row = v.data() + i * k;
    T mx = row[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T denom = T(0);
    for (int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    for (int64_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(row[j] - mx) / denom;
    loss -= std::log(probs[i * k + labels[static_cast<size_t>(i)]]);
  }
  loss /= static_cast<T>(b);

  Tensor<T> out(Shape{1});
  out[0] = loss;
  Var out_var = tape.alloc(std::move(out), tape.needs_grad(scores));
  tape.record([scores, out_var, probs = std::move(probs), labels, b, k](Tape<T>& t) {
    if (!t.needs_grad(scores)) return;
    const T g = t.grad(out_var)[0] / static_cast<T>(b);
    auto& gs = t.grad(scores);
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < k; ++j) {
        T d = probs[i * k + j];
        if (j == labels[static_cast<size_t>(i)]) d -= T(1);
        gs[i * k + j] += g * d;
      }
  });
  return out_var;
}

// Soft Dice loss on sigmoid(scores) against a binary mask, smoothing
// constant 1, averaged over the batch:
//   L_b = 1 - (2 sum(p g) + 1) / (sum p + sum g + 1).
template <typename T>
Var dice_loss(Tape<T>& tape, Var scores, const Tensor<T>& mask) {
  const auto& v = tape.value(scores);
  if (v.shape().ndim() != 4) throw ShapeError("dice_loss expects scores [B,1,H,W]");
  check_same_shape(v, mask, "dice_loss");
  for (int64_t i = 0; i < mask.size(); ++i)
    if (mask[i] != T(0) && mask[i] != T(1))
      throw ContractError("dice_loss: mask must be binary");
  const int64_t b = v.shape().dim(0);
  const int64_t n = v.size() / b;
  const T smooth = T(1);

  Tensor<T> p(v.shape());
  for (int64_t i = 0; i < v.size(); ++i) {
    const T x = v[i];
    p[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }
  std::vector<T> numer(static_cast<size_t>(b)), denom(static_cast<size_t>(b));
  T loss = T(0);
  for (int64_t i = 0; i < b; ++i) {
    T pg = T(0), ps = T(0), gs = T(0);
    const T* pi = p.data() + i * n;
    const T* gi = mask.data() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      pg += pi[j] * gi[j];
      ps += pi[j];
      gs += gi[j];
    }
    numer[static_cast<size_t>(i)] = T(2) * pg + smooth;
    denom[static_cast<size_t>(i)] = ps + gs + smooth;
    loss += T(1) - numer[static_cast<size_t>(i)] / denom[static_cast<size_t>(i)];
  }
  loss /= static_cast<T>(b);

  Tensor<T> out(Shape{1});
  out[0] = loss;
  Var out_var = tape.alloc(std::move(out), tape.needs_grad(scores));
  tape.record([scores, out_var, p = std::move(p), mask, numer = std::move(numer),
               denom = std::move(denom), b, n](Tape<T>& t) {
    if (!t.needs_grad(scores)) return;
    const T g = t.grad(out_var)[0] / static_cast<T>(b);
    auto& gs = t.grad(scores);
    for (int64_t i = 0; i < b; ++i) {
      const T nb = numer[static_cast<size_t>(i)], db = denom[static_cast<size_t>(i)];
      const T* pi = p.data() + i * n;
      const T* gi = mask.data() + i * n;
      for (int64_t j = 0; j < n; ++j) {
        // dL_b/dp = -(2 g db - nb) / db^2, then dp/ds = p (1 - p).
        const T dLdp = -(T(2) * gi[j] * db - nb) / (db * db);
        gs[i * n + j] += g * dLdp * pi[j] * (T(1) - pi[j]);
      }
    }
  });
  return out_var;
}

}  // namespace cxnn::ops
