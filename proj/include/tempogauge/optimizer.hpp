#pragma once

#include <string>
#include <vector>

#include "tempogauge/tensor.hpp"

namespace tempogauge::nn {

// Named view of one tensor in a model. grad is null for buffers
// (batch-norm moving statistics), which are saved but never optimized.
template <class T>
struct TensorRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

// SGD with momentum and elementwise gradient clipping. The update is
//   v <- momentum * v + clamp(g, -clip, clip)
//   p <- p - lr * v
// Velocity slots are keyed by position in the param list, which must stay
// stable across steps.
template <class T>
class SgdMomentum {
 public:
  explicit SgdMomentum(T lr = T(1e-3), T momentum = T(0.9), T clip = T(5))
      : lr_(lr), momentum_(momentum), clip_(clip) {}

  void step(const std::vector<TensorRef<T>>& params) {
    if (velocity_.empty()) {
      velocity_.reserve(params.size());
      for (const auto& p : params) {
        velocity_.emplace_back(p.value->shape());
      }
    }
    if (velocity_.size() != params.size()) {
      throw ShapeError("sgd: parameter list changed size between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (p.grad == nullptr) {
        throw ShapeError("sgd: \"" + p.name + "\" has no gradient");
      }
      if (!p.value->same_shape(*p.grad) || !p.value->same_shape(velocity_[i])) {
        throw ShapeError("sgd: shape mismatch on \"" + p.name + "\"");
      }
      T* v = velocity_[i].data();
      T* w = p.value->data();
      const T* g = p.grad->data();
      std::size_t n = p.value->numel();
      for (std::size_t j = 0; j < n; ++j) {
        T gc = g[j];
        if (gc > clip_) gc = clip_;
        if (gc < -clip_) gc = -clip_;
        v[j] = momentum_ * v[j] + gc;
        w[j] -= lr_ * v[j];
      }
    }
  }

  T lr() const { return lr_; }
  T momentum() const { return momentum_; }
  T clip() const { return clip_; }

 private:
  T lr_, momentum_, clip_;
  std::vector<Tensor<T>> velocity_;
};

}  // namespace tempogauge::nn
