#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cxnn/complex_tensor.hpp"
#include "cxnn/tensor.hpp"

namespace cxnn {

enum class Domain { Real, Complex };

// Trainable parameter with planar storage. A complex parameter keeps its
// real and imaginary planes as two real tensors; its gradient follows the
// split-real convention: grad.re = dL/dw_r and grad.im = dL/dw_i, i.e.
// the loss is differentiated as a function of the 2N real coordinates.
// (This equals twice the conjugate Wirtinger derivative.) Consequently a
// complex parameter reports 2x the trainable coordinates of its real
// counterpart of equal shape.
template <typename T>
struct Parameter {
  uint64_t id = 0;
  std::string name;
  Domain domain = Domain::Real;
  bool trainable = true;
  Tensor<T> value_re;
  Tensor<T> value_im;  // empty for Domain::Real
  Tensor<T> grad_re;
  Tensor<T> grad_im;

  static Parameter real(uint64_t id, std::string name, Tensor<T> value) {
    Parameter p;
    p.id = id;
    p.name = std::move(name);
    p.domain = Domain::Real;
    p.grad_re = Tensor<T>::zeros(value.shape());
    p.value_re = std::move(value);
    return p;
  }

  static Parameter complex(uint64_t id, std::string name, Tensor<T> re, Tensor<T> im) {
    check_same_shape(re, im, "complex parameter planes");
    Parameter p;
    p.id = id;
    p.name = std::move(name);
    p.domain = Domain::Complex;
    p.grad_re = Tensor<T>::zeros(re.shape());
    p.grad_im = Tensor<T>::zeros(im.shape());
    p.value_re = std::move(re);
    p.value_im = std::move(im);
    return p;
  }

  const Shape& shape() const { return value_re.shape(); }

  // Trainable real coordinates: N for real, 2N for complex.
  int64_t coord_count() const {
    return domain == Domain::Complex ? 2 * value_re.size() : value_re.size();
  }

  void zero_grad() {
    grad_re = Tensor<T>::zeros(value_re.shape());
    if (domain == Domain::Complex) grad_im = Tensor<T>::zeros(value_im.shape());
  }

  // Flat views over the real coordinates, imaginary plane second.
  T* coord_value(int64_t i) {
    int64_t n = value_re.size();
    return i < n ? &value_re[i] : &value_im[i - n];
  }
  T coord_grad(int64_t i) const {
    int64_t n = value_re.size();
    return i < n ? grad_re[i] : grad_im[i - n];
  }
};

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

// Handle to a tape variable (a node's output tensor).
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Real-or-complex value flowing between layers: a real value carries only
// the re handle, a complex one carries both planes.
struct TapeVal {
  Var re;
  Var im;
  bool is_complex() const { return im.valid(); }
  static TapeVal real(Var v) { return TapeVal{v, Var{}}; }
  static TapeVal complex(Var r, Var i) { return TapeVal{r, i}; }
};

// Dynamic reverse-mode tape. Operations append variables (holding the
// forward value) and nodes (holding a backward closure); creation order
// is the topological order, so the backward pass is a single reverse
// sweep visiting each node exactly once. One tape per training thread;
// a tape is recorded, differentiated once, and discarded or cleared.
template <typename T>
class Tape {
 public:
  using TensorT = Tensor<T>;

  Var alloc(TensorT value, bool needs_grad) {
    vars_.push_back(VarData{std::move(value), TensorT(), nullptr, 0, needs_grad});
    return Var{static_cast<int>(vars_.size()) - 1};
  }

  Var constant(TensorT value) { return alloc(std::move(value), false); }

  // Records a backward step. The closure must only touch variables that
  // already exist at record time.
  void record(std::function<void(Tape&)> backward_step) {
    nodes_.push_back(std::move(backward_step));
  }

  const TensorT& value(Var v) const { return vars_[static_cast<size_t>(v.id)].value; }
  TensorT& grad(Var v) { return vars_[static_cast<size_t>(v.id)].grad; }
  bool needs_grad(Var v) const { return vars_[static_cast<size_t>(v.id)].needs_grad; }

  // Binds a parameter as a leaf. Repeated requests for the same parameter
  // reuse the existing leaf so gradients accumulate through every use.
  TapeVal leaf(Parameter<T>& p) {
    auto it = param_vars_.find(p.id);
    if (it != param_vars_.end()) return it->second;
    TapeVal val;
    Var re = alloc(p.value_re, p.trainable);
    vars_[static_cast<size_t>(re.id)].bound = &p;
    vars_[static_cast<size_t>(re.id)].plane = 0;
    if (p.domain == Domain::Complex) {
      Var im = alloc(p.value_im, p.trainable);
      vars_[static_cast<size_t>(im.id)].bound = &p;
      vars_[static_cast<size_t>(im.id)].plane = 1;
      val = TapeVal::complex(re, im);
    } else {
      val = TapeVal::real(re);
    }
    param_vars_.emplace(p.id, val);
    return val;
  }

  // Reverse sweep from a scalar loss. Fills Parameter::grad of every
  // bound trainable leaf (accumulating, so callers zero grads between
  // optimizer steps).
  void backward(Var loss) {
    if (value(loss).size() != 1)
      throw ContractError("backward: loss must be a scalar, got shape " +
                          value(loss).shape().str());
    if (backward_done_)
      throw StateError("backward called twice on one tape without re-recording");
    backward_done_ = true;
    for (auto& v : vars_) v.grad = TensorT::zeros(v.value.shape());
    grad(loss)[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
    for (auto& v : vars_) {
      if (v.bound == nullptr || !v.needs_grad) continue;
      TensorT& dst = v.plane == 0 ? v.bound->grad_re : v.bound->grad_im;
      for (int64_t i = 0; i < dst.size(); ++i) dst[i] += v.grad[i];
    }
  }

  void clear() {
    vars_.clear();
    nodes_.clear();
    param_vars_.clear();
    backward_done_ = false;
  }

 private:
  struct VarData {
    TensorT value;
    TensorT grad;
    Parameter<T>* bound;
    int plane;
    bool needs_grad;
  };

  std::vector<VarData> vars_;
  std::vector<std::function<void(Tape&)>> nodes_;
  std::unordered_map<uint64_t, TapeVal> param_vars_;
  bool backward_done_ = false;
};

// Central-difference gradient verification. `loss_fn` evaluates the loss
// at the parameters' current values; the analytic gradients must already
// be present in Parameter::grad (run backward first). Every real
// coordinate of every trainable parameter is perturbed, including both
// planes of complex parameters. Returns the worst discrepancy
// |analytic - numeric| / max(|analytic|, |numeric|, 1).
template <typename T>
double finite_difference_check(const std::function<T()>& loss_fn,
                               const std::vector<Parameter<T>*>& params, T epsilon) {
  if (!(epsilon > T(0))) throw ContractError("finite_difference_check: epsilon must be > 0");
  const T base = loss_fn();
  if (loss_fn() != base)
    throw OracleError("finite_difference_check: loss function is not deterministic");
  double worst = 0.0;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (int64_t i = 0; i < p->coord_count(); ++i) {
      T* w = p->coord_value(i);
      const T saved = *w;
      *w = saved + epsilon;
      const double up = static_cast<double>(loss_fn());
      *w = saved - epsilon;
      const double down = static_cast<double>(loss_fn());
      *w = saved;
      const double numeric = (up - down) / (2.0 * static_cast<double>(epsilon));
      const double analytic = static_cast<double>(p->coord_grad(i));
      const double denom = std::max({std::abs(numeric), std::abs(analytic), 1.0});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace cxnn
