#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "petl/layers.hpp"
#include "petl/tensor.hpp"

namespace petl {

struct NonFiniteGradientError : std::runtime_error {
  explicit NonFiniteGradientError(const std::string& param)
      : std::runtime_error("adam_step: non-finite gradient in parameter " + param) {}
};

// Bias-corrected Adam over a fixed parameter list. One shared step counter;
// per-parameter first and second moments.
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedTensor<T>> params, T alpha, T beta1 = T(0.9), T beta2 = T(0.999),
       T epsilon = T(1e-7))
      : params_(std::move(params)), alpha_(alpha), beta1_(beta1), beta2_(beta2),
        epsilon_(epsilon) {
    for (auto& p : params_) {
      m_.emplace_back(p.tensor->data.size(), T(0));
      v_.emplace_back(p.tensor->data.size(), T(0));
    }
  }

  // Rejects the whole step if any gradient entry is non-finite; parameters
  // and moments are left untouched in that case.
  void step() {
    for (auto& p : params_)
      for (T g : p.tensor->grad)
        if (!std::isfinite(g)) throw NonFiniteGradientError(p.name);
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      TensorT<T>& p = *params_[i].tensor;
      for (std::size_t j = 0; j < p.data.size(); ++j) {
        const T g = p.grad[j];
        m_[i][j] = beta1_ * m_[i][j] + (T(1) - beta1_) * g;
        v_[i][j] = beta2_ * v_[i][j] + (T(1) - beta2_) * g * g;
        const T mhat = m_[i][j] / bc1;
        const T vhat = v_[i][j] / bc2;
        p.data[j] -= alpha_ * mhat / (std::sqrt(vhat) + epsilon_);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
  }

  std::int64_t steps() const { return t_; }

  T learning_rate() const { return alpha_; }
  void set_learning_rate(T alpha) { alpha_ = alpha; }

 private:
  std::vector<NamedTensor<T>> params_;
  T alpha_, beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace petl
