#pragma once

#include <random>

#include "sonarfit/nn/gradcheck.hpp"
#include "sonarfit/nn/ops.hpp"

namespace testutil {

using sonarfit::nn::Array;
using sonarfit::nn::Rng;
using sonarfit::nn::Shape;
using sonarfit::nn::Tensor;

inline Array random_array(Shape shape, Rng& rng, double scale = 1.0) {
  Array a(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : a.values()) v = dist(rng);
  return a;
}

inline Tensor random_leaf(Shape shape, Rng& rng, double scale = 1.0) {
  return Tensor::leaf(random_array(std::move(shape), rng, scale));
}

/// Projects a non-scalar output to a scalar with fixed random weights so
/// every output coordinate contributes to the checked gradient.
inline Tensor project(const Tensor& out, const Array& weights) {
  return sonarfit::nn::weighted_sum(out, weights);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace testutil
