#pragma once

#include <cmath>
#include <vector>

#include "deltamap/autodiff.hpp"

namespace deltamap {

template <class S>
class Adam {
 public:
  Adam(std::vector<ad::Var<S>> params, double lr, double beta1, double beta2, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.push_back(ad::Tensor<S>::zeros_like(p->val));
      v_.push_back(ad::Tensor<S>::zeros_like(p->val));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p->has_grad_buffer()) continue;
      for (size_t j = 0; j < p->val.size(); ++j) {
        double g = static_cast<double>(p->grad.v[j]);
        double m = beta1_ * static_cast<double>(m_[i].v[j]) + (1.0 - beta1_) * g;
        double v = beta2_ * static_cast<double>(v_[i].v[j]) + (1.0 - beta2_) * g * g;
        m_[i].v[j] = static_cast<S>(m);
        v_[i].v[j] = static_cast<S>(v);
        double update = lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        p->val.v[j] = static_cast<S>(static_cast<double>(p->val.v[j]) - update);
      }
    }
  }

  void zero_grad() { ad::zero_grads(params_); }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  int64_t steps_taken() const { return t_; }

 private:
  std::vector<ad::Var<S>> params_;
  std::vector<ad::Tensor<S>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace deltamap
