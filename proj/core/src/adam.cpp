#include "xsdepth/adam.hpp"

#include <cmath>

namespace xsdepth {

AdamOptimizer::AdamOptimizer(std::vector<Var> params, Scalar lr, Scalar beta1, Scalar beta2,
                             Scalar eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  XS_REQUIRE(lr_ > 0, "AdamOptimizer: learning rate must be > 0");
  state_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    state_[i].m = Tensor::zeros(params_[i]->value.shape());
    state_[i].v = Tensor::zeros(params_[i]->value.shape());
  }
}

void AdamOptimizer::step() {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p->grad.numel() != p->value.numel()) continue;  // never touched by backward
    Scalar* w = p->value.data();
    const Scalar* g = p->grad.data();
    Scalar* m = state_[i].m.data();
    Scalar* v = state_[i].v.data();
    const long n = p->value.numel();
    for (long k = 0; k < n; ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const Scalar m_hat = m[k] / bc1;
      const Scalar v_hat = v[k] / bc2;
      w[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (Var& p : params_) p->zero_grad();
}

}  // namespace xsdepth
