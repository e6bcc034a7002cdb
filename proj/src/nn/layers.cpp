#include "tagfont/nn/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "tagfont/common/errors.hpp"

namespace tagfont::nn {

namespace {

using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

void im2col(const Scalar* img, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, Scalar* col) {
  const int cols = oh * ow;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          Scalar* dst = row + oy * ow;
          if (iy < 0 || iy >= h) {
            for (int ox = 0; ox < ow; ++ox) dst[ox] = 0;
            continue;
          }
          const Scalar* src = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0;
          }
        }
      }
    }
  }
}

void col2im(const Scalar* col, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, Scalar* img) {
  const int cols = oh * ow;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row =
            col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          Scalar* dst = img + (static_cast<std::size_t>(ch) * h + iy) * w;
          const Scalar* src = row + oy * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void zero_grads(const ParameterList& params) {
  for (auto* p : params) p->zero_grad();
}

std::vector<Scalar> snapshot(const ParameterList& params) {
  std::vector<Scalar> out;
  for (const auto* p : params)
    out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

Scalar sigmoid(Scalar x) {
  if (x >= 0) {
    const Scalar e = std::exp(-x);
    return 1 / (1 + e);
  }
  const Scalar e = std::exp(x);
  return e / (1 + e);
}

Scalar softplus(Scalar x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel,
               int stride, int padding)
    : cin_(in_channels), cout_(out_channels), k_(kernel), stride_(stride),
      pad_(padding),
      weight_(name + ".weight", Tensor({out_channels, in_channels * kernel * kernel})),
      bias_(name + ".bias", Tensor({out_channels})) {}

void Conv2d::init_he(Rng& rng, Scalar gain) {
  const Scalar fan_in = static_cast<Scalar>(cin_ * k_ * k_);
  std::normal_distribution<Scalar> dist(0.0, std::sqrt(gain / fan_in));
  for (auto& v : weight_.value.values()) v = dist(rng);
  bias_.value.fill(0);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) != cin_) {
    throw InvalidArgument("Conv2d " + weight_.name + ": bad input " + x.shape_string());
  }
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  out_h_ = out_size(h);
  out_w_ = out_size(w);
  if (out_h_ <= 0 || out_w_ <= 0) throw InvalidArgument("Conv2d: input too small");
  in_shape_ = x.shape();
  const int rows = cin_ * k_ * k_, cols = out_h_ * out_w_;
  cols_.resize(static_cast<std::size_t>(n));
  Tensor y({n, cout_, out_h_, out_w_});
  CMapMat wmat(weight_.value.data(), cout_, rows);
  for (int i = 0; i < n; ++i) {
    auto& col = cols_[static_cast<std::size_t>(i)];
    col.resize(static_cast<std::size_t>(rows) * cols);
    im2col(x.slice(i).data(), cin_, h, w, k_, stride_, pad_, out_h_, out_w_, col.data());
    MapMat out(y.slice(i).data(), cout_, cols);
    out.noalias() = wmat * CMapMat(col.data(), rows, cols);
    for (int c = 0; c < cout_; ++c) out.row(c).array() += bias_.value[static_cast<std::size_t>(c)];
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
  const int rows = cin_ * k_ * k_, cols = out_h_ * out_w_;
  Tensor dx(in_shape_);
  MapMat dw(weight_.grad.data(), cout_, rows);
  CMapMat wmat(weight_.value.data(), cout_, rows);
  std::vector<Scalar> dcol(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < n; ++i) {
    CMapMat dy(grad_out.slice(i).data(), cout_, cols);
    CMapMat col(cols_[static_cast<std::size_t>(i)].data(), rows, cols);
    dw.noalias() += dy * col.transpose();
    for (int c = 0; c < cout_; ++c) bias_.grad[static_cast<std::size_t>(c)] += dy.row(c).sum();
    MapMat dc(dcol.data(), rows, cols);
    dc.noalias() = wmat.transpose() * dy;
    col2im(dcol.data(), cin_, h, w, k_, stride_, pad_, out_h_, out_w_, dx.slice(i).data());
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in_features, int out_features)
    : in_(in_features), out_(out_features),
      weight_(name + ".weight", Tensor({out_features, in_features})),
      bias_(name + ".bias", Tensor({out_features})) {}

void Linear::init_he(Rng& rng, Scalar gain) {
  std::normal_distribution<Scalar> dist(0.0, std::sqrt(gain / in_));
  for (auto& v : weight_.value.values()) v = dist(rng);
  bias_.value.fill(0);
}

void Linear::init_normal(Rng& rng, Scalar mean, Scalar stddev) {
  std::normal_distribution<Scalar> dist(mean, stddev);
  for (auto& v : weight_.value.values()) v = dist(rng);
  bias_.value.fill(0);
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_) {
    throw InvalidArgument("Linear " + weight_.name + ": expected [N, " +
                          std::to_string(in_) + "], got " + x.shape_string());
  }
  input_ = x;
  const int n = x.dim(0);
  Tensor y({n, out_});
  MapMat out(y.data(), n, out_);
  out.noalias() = CMapMat(x.data(), n, in_) *
                  CMapMat(weight_.value.data(), out_, in_).transpose();
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_; ++o) y.at(i, o) += bias_.value[static_cast<std::size_t>(o)];
  return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const int n = input_.dim(0);
  CMapMat dy(grad_out.data(), n, out_);
  MapMat(weight_.grad.data(), out_, in_).noalias() +=
      dy.transpose() * CMapMat(input_.data(), n, in_);
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += grad_out.at(i, o);
  Tensor dx({n, in_});
  MapMat(dx.data(), n, in_).noalias() = dy * CMapMat(weight_.value.data(), out_, in_);
  return dx;
}

// ---------------------------------------------------------------- activations

Tensor ReLU::forward(const Tensor& x) {
  input_ = x;
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0 ? v : 0;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) const {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (input_[i] <= 0) dx[i] = 0;
  return dx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
  input_ = x;
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0 ? v : slope_ * v;
  return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) const {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (input_[i] <= 0) dx[i] *= slope_;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x) {
  output_ = x;
  for (auto& v : output_.values()) v = sigmoid(v);
  return output_;
}

Tensor Sigmoid::backward(const Tensor& grad_out) const {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= output_[i] * (1 - output_[i]);
  return dx;
}

Tensor Dropout::forward(const Tensor& x, bool training, Rng& rng) {
  active_ = training && rate_ > 0;
  if (!active_) return x;
  mask_ = Tensor::like(x);
  std::bernoulli_distribution keep(1.0 - rate_);
  const Scalar scale = 1.0 / (1.0 - rate_);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask_[i] = keep(rng) ? scale : 0.0;
    y[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) const {
  if (!active_) return grad_out;
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

Tensor Upsample2x::forward(const Tensor& x) {
  in_shape_ = x.shape();
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor y({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx) y.at(i, ch, yy, xx) = x.at(i, ch, yy / 2, xx / 2);
  return y;
}

Tensor Upsample2x::backward(const Tensor& grad_out) const {
  Tensor dx(in_shape_);
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int yy = 0; yy < 2 * h; ++yy)
        for (int xx = 0; xx < 2 * w; ++xx)
          dx.at(i, ch, yy / 2, xx / 2) += grad_out.at(i, ch, yy, xx);
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_shape_ = x.shape();
  Tensor y = untile_spatial(x);
  y.scale_(1.0 / (x.dim(2) * x.dim(3)));
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) const {
  Tensor dx = tile_spatial(grad_out, in_shape_[2], in_shape_[3]);
  dx.scale_(1.0 / (in_shape_[2] * in_shape_[3]));
  return dx;
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(const std::string& name, int channels)
    : conv1_(name + ".conv1", channels, channels, 3, 1, 1),
      conv2_(name + ".conv2", channels, channels, 3, 1, 1) {}

void ResidualBlock::init(Rng& rng) {
  conv1_.init_he(rng);
  // Down-scaled second conv keeps the block close to identity at init.
  conv2_.init_he(rng, 0.5);
}

Tensor ResidualBlock::forward(const Tensor& x) {
  Tensor h = conv2_.forward(relu1_.forward(conv1_.forward(x)));
  h.add_(x);
  return relu_out_.forward(h);
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
  Tensor g = relu_out_.backward(grad_out);
  Tensor dx = conv1_.backward(relu1_.backward(conv2_.backward(g)));
  dx.add_(g);
  return dx;
}

}  // namespace tagfont::nn
