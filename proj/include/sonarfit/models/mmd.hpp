#pragma once

#include <vector>

#include "sonarfit/nn/tensor.hpp"

namespace sonarfit::models {

struct MmdOptions {
  /// Gaussian kernels at these multiples of the base bandwidth, averaged.
  std::vector<double> multipliers{0.5, 1.0, 2.0};
  /// Base bandwidth; <= 0 selects the median pairwise distance of the pooled
  /// sample (1.0 if that median is zero).
  double fixed_bandwidth = 0.0;
};

/// Biased squared MMD between x [n, d] and y [m, d]:
/// mean k(x,x') + mean k(y,y') - 2 mean k(x,y), k(a,b) = exp(-|a-b|^2 / (2 s^2)).
nn::Tensor mmd(const nn::Tensor& x, const nn::Tensor& y, const MmdOptions& opts = {});

}  // namespace sonarfit::models
