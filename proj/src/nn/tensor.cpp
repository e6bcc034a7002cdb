#include "tagfont/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tagfont/common/errors.hpp"

namespace tagfont::nn {

namespace {
std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidArgument("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return shape.empty() ? 0 : n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape, Scalar fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

std::size_t Tensor::slice_size() const {
  if (shape_.empty() || shape_[0] == 0) return 0;
  return data_.size() / static_cast<std::size_t>(shape_[0]);
}

std::span<Scalar> Tensor::slice(int n) {
  const std::size_t s = slice_size();
  return {data_.data() + static_cast<std::size_t>(n) * s, s};
}

std::span<const Scalar> Tensor::slice(int n) const {
  const std::size_t s = slice_size();
  return {data_.data() + static_cast<std::size_t>(n) * s, s};
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other, Scalar scale) {
  if (other.size() != size()) {
    throw InvalidArgument("add_: size mismatch " + shape_string() + " vs " +
                          other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void Tensor::scale_(Scalar s) {
  for (auto& v : data_) v *= s;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (element_count(shape) != size()) {
    throw InvalidArgument("reshape: element count mismatch");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Scalar v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::ostringstream ss;
  ss << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) ss << ", ";
    ss << shape_[i];
  }
  ss << ']';
  return ss.str();
}

void expect_shape(const Tensor& t, const std::vector<int>& shape,
                  const char* what) {
  if (t.shape() != shape) {
    Tensor expected(shape);
    throw InvalidArgument(std::string(what) + ": expected shape " +
                          expected.shape_string() + ", got " +
                          t.shape_string());
  }
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) ||
      a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw InvalidArgument("concat_channels: incompatible " + a.shape_string() +
                          " and " + b.shape_string());
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
  const std::size_t sa = a.slice_size(), sb = b.slice_size();
  for (int i = 0; i < n; ++i) {
    auto dst = out.slice(i);
    std::copy_n(a.slice(i).begin(), sa, dst.begin());
    std::copy_n(b.slice(i).begin(), sb, dst.begin() + static_cast<long>(sa));
  }
  return out;
}

void split_channels(const Tensor& joined, int channels_a, Tensor& grad_a,
                    Tensor& grad_b) {
  const int n = joined.dim(0), h = joined.dim(2), w = joined.dim(3);
  const int cb = joined.dim(1) - channels_a;
  grad_a = Tensor({n, channels_a, h, w});
  grad_b = Tensor({n, cb, h, w});
  const std::size_t sa = grad_a.slice_size(), sb = grad_b.slice_size();
  for (int i = 0; i < n; ++i) {
    auto src = joined.slice(i);
    std::copy_n(src.begin(), sa, grad_a.slice(i).begin());
    std::copy_n(src.begin() + static_cast<long>(sa), sb, grad_b.slice(i).begin());
  }
}

Tensor tile_spatial(const Tensor& vec, int h, int w) {
  const int n = vec.dim(0), d = vec.dim(1);
  Tensor out({n, d, h, w});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      const Scalar v = vec.at(i, c);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(i, c, y, x) = v;
    }
  return out;
}

Tensor untile_spatial(const Tensor& grid) {
  const int n = grid.dim(0), d = grid.dim(1), h = grid.dim(2), w = grid.dim(3);
  Tensor out({n, d});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) {
      Scalar s = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) s += grid.at(i, c, y, x);
      out.at(i, c) = s;
    }
  return out;
}

}  // namespace tagfont::nn
