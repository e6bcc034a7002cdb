#pragma once

#include <vector>

#include "tagfont/nn/layers.hpp"

namespace tagfont::nn {

// Adam over a fixed parameter group with one learning rate. Parameters not
// handed to an optimizer are never touched by it, which is how stages freeze
// sub-networks.
class Adam {
 public:
  Adam(ParameterList params, Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
       Scalar eps = 1e-8);

  void step();
  void zero_grad() { zero_grads(params_); }
  const ParameterList& params() const { return params_; }
  Scalar lr() const { return lr_; }
  void set_lr(Scalar lr) { lr_ = lr; }

 private:
  ParameterList params_;
  Scalar lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace tagfont::nn
