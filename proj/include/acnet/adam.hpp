#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "acnet/tensor.hpp"

namespace acnet {

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  int64_t step = 0;
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

// Bias-corrected Adam over a fixed parameter list. Parameters whose grad
// buffer is still unallocated are treated as zero-gradient.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, T lr) : params_(std::move(params)) {
    state_.lr = lr;
    state_.first_moment.resize(params_.size());
    state_.second_moment.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      state_.first_moment[i].assign(params_[i].numel(), T(0));
      state_.second_moment[i].assign(params_[i].numel(), T(0));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() { step(state_.lr); }

  void step(T lr) {
    state_.step += 1;
    const T bc1 = T(1) - std::pow(state_.beta1, static_cast<T>(state_.step));
    const T bc2 = T(1) - std::pow(state_.beta2, static_cast<T>(state_.step));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& w = params_[i].values();
      auto& g = params_[i].grad();
      auto& m = state_.first_moment[i];
      auto& v = state_.second_moment[i];
      for (size_t j = 0; j < w.size(); ++j) {
        m[j] = state_.beta1 * m[j] + (T(1) - state_.beta1) * g[j];
        v[j] = state_.beta2 * v[j] + (T(1) - state_.beta2) * g[j] * g[j];
        const T m_hat = m[j] / bc1;
        const T v_hat = v[j] / bc2;
        w[j] -= lr * m_hat / (std::sqrt(v_hat) + state_.epsilon);
      }
    }
  }

  const AdamState<T>& state() const { return state_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamState<T> state_;
};

}  // namespace acnet
