#pragma once

#include <random>
#include <string>
#include <vector>

#include "tagfont/nn/tensor.hpp"

namespace tagfont::nn {

using Rng = std::mt19937_64;

// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::like(value)) {}
  void zero_grad() { grad.fill(0); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);
// Flat copy of every parameter value, for frozen-parameter comparisons.
std::vector<Scalar> snapshot(const ParameterList& params);

// Layers are stateful: backward() consumes the caches of the most recent
// forward() call on the same instance.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_channels, int out_channels, int kernel,
         int stride, int padding);

  void init_he(Rng& rng, Scalar gain = 2.0);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParameterList& out) { out.push_back(&weight_); out.push_back(&bias_); }

  int out_size(int in_size) const { return (in_size + 2 * pad_ - k_) / stride_ + 1; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
  Parameter weight_;  // [cout, cin*k*k]
  Parameter bias_;    // [cout]
  std::vector<int> in_shape_;
  std::vector<std::vector<Scalar>> cols_;  // per-sample im2col buffers
  int out_h_ = 0, out_w_ = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  void init_he(Rng& rng, Scalar gain = 2.0);
  void init_normal(Rng& rng, Scalar mean, Scalar stddev);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParameterList& out) { out.push_back(&weight_); out.push_back(&bias_); }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Parameter& weight() { return weight_; }  // [out, in]
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  int in_ = 0, out_ = 0;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor input_;
};

class LeakyReLU {
 public:
  explicit LeakyReLU(Scalar slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Scalar slope_;
  Tensor input_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor output_;
};

// Inverted dropout; identity when not training.
class Dropout {
 public:
  explicit Dropout(Scalar rate = 0.5) : rate_(rate) {}
  Tensor forward(const Tensor& x, bool training, Rng& rng);
  Tensor backward(const Tensor& grad_out) const;
  Scalar rate() const { return rate_; }

 private:
  Scalar rate_;
  bool active_ = false;
  Tensor mask_;
};

class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<int> in_shape_;
};

class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<int> in_shape_;
};

// conv3x3 -> relu -> conv3x3, plus identity, then relu.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, int channels);
  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(ParameterList& out) { conv1_.collect(out); conv2_.collect(out); }

 private:
  Conv2d conv1_, conv2_;
  ReLU relu1_, relu_out_;
};

Scalar sigmoid(Scalar x);
// log(1 + exp(x)) without overflow.
Scalar softplus(Scalar x);

}  // namespace tagfont::nn
