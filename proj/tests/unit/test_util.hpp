#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "tagfont/nn/tensor.hpp"

namespace testutil {

inline tagfont::nn::Tensor random_tensor(const std::vector<int>& shape, std::mt19937_64& rng,
                                         double stddev = 1.0) {
  tagfont::nn::Tensor t(shape);
  std::normal_distribution<double> d(0.0, stddev);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Relative error with an absolute floor so near-zero gradients compare sanely.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace testutil
