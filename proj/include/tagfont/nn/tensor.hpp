#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tagfont::nn {

using Scalar = double;

// Dense row-major tensor. Image batches use NCHW, vector batches use [N, D].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Scalar fill = 0);

  static Tensor like(const Tensor& other, Scalar fill = 0) {
    return Tensor(other.shape_, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }
  std::vector<Scalar>& storage() { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] + w];
  }
  Scalar at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) *
                     shape_[3] + w];
  }
  Scalar& at(int n, int d) {
    return data_[static_cast<std::size_t>(n) * shape_[1] + d];
  }
  Scalar at(int n, int d) const {
    return data_[static_cast<std::size_t>(n) * shape_[1] + d];
  }

  // Elements per leading-dimension slice (e.g. one sample of a batch).
  std::size_t slice_size() const;
  std::span<Scalar> slice(int n);
  std::span<const Scalar> slice(int n) const;

  void fill(Scalar v);
  void add_(const Tensor& other, Scalar scale = 1);
  void scale_(Scalar s);
  Tensor reshaped(std::vector<int> shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<Scalar> data_;
};

// Throws InvalidArgument with a readable message if shapes differ.
void expect_shape(const Tensor& t, const std::vector<int>& shape,
                  const char* what);

// Channel-axis concatenation of two NCHW tensors and its adjoint.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& joined, int channels_a, Tensor& grad_a,
                    Tensor& grad_b);

// Broadcast an [N, D] batch over an H x W grid -> [N, D, H, W], and the
// adjoint (spatial sum).
Tensor tile_spatial(const Tensor& vec, int h, int w);
Tensor untile_spatial(const Tensor& grid);

}  // namespace tagfont::nn
