#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cxnn/autodiff.hpp"

namespace cxnn {

// Adam with bias correction. Complex parameters are updated as 2N
// independent real coordinates (their two planes share nothing but the
// step counter), which is exactly the split-real gradient convention.
template <typename T>
class Adam {
 public:
  struct Config {
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
  };

  explicit Adam(Config cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<Parameter<T>*>& params) {
    ++t_;
    const T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(t_));
    for (auto* p : params) {
      if (!p->trainable) continue;
      State& s = state_[p->id];
      const int64_t n = p->coord_count();
      if (static_cast<int64_t>(s.m.size()) != n) {
        s.m.assign(static_cast<size_t>(n), T(0));
        s.v.assign(static_cast<size_t>(n), T(0));
      }
      update_plane(p->value_re, p->grad_re, s, 0, bc1, bc2);
      if (p->domain == Domain::Complex)
        update_plane(p->value_im, p->grad_im, s, p->value_re.size(), bc1, bc2);
    }
  }

  int64_t steps() const { return t_; }

 private:
  struct State {
    std::vector<T> m, v;
  };

  void update_plane(Tensor<T>& value, const Tensor<T>& grad, State& s, int64_t offset, T bc1,
                    T bc2) {
    for (int64_t i = 0; i < value.size(); ++i) {
      const T g = grad[i];
      T& m = s.m[static_cast<size_t>(offset + i)];
      T& v = s.v[static_cast<size_t>(offset + i)];
      m = cfg_.beta1 * m + (T(1) - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (T(1) - cfg_.beta2) * g * g;
      const T mhat = m / bc1;
      const T vhat = v / bc2;
      value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

  Config cfg_;
  int64_t t_ = 0;
  std::unordered_map<uint64_t, State> state_;
};

}  // namespace cxnn
