#include "tagfont/nn/optim.hpp"

#include <cmath>

namespace tagfont::nn {

Adam::Adam(ParameterList params, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    m_.push_back(Tensor::like(p->value));
    v_.push_back(Tensor::like(p->value));
  }
}

void Adam::step() {
  ++t_;
  const Scalar c1 = 1 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar c2 = 1 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const Scalar g = p.grad[i];
      m[i] = beta1_ * m[i] + (1 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace tagfont::nn
