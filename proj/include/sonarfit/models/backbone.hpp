#pragma once

#include <array>

#include "sonarfit/nn/layers.hpp"

namespace sonarfit::models {

inline constexpr std::array<std::size_t, 4> kBackboneFilters{32, 32, 64, 64};
inline constexpr double kLeakySlope = 0.2;

struct BackboneOutput {
  nn::Tensor feature_map;  // [N, 64, h, w]
  nn::Tensor embedding;    // [N, 64*h*w]
};

/// Four blocks of conv3x3 -> batch norm -> leaky ReLU(0.2) -> 2x2 max pool
/// over a [N, 1, frames, bins] input. Parameters live under "feature.".
class ConvBackbone {
 public:
  ConvBackbone() = default;
  ConvBackbone(nn::ParameterSet& params, std::size_t frames, std::size_t bins, nn::Rng& rng);

  BackboneOutput forward(const nn::Tensor& images, bool training);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t map_height() const { return map_h_; }
  std::size_t map_width() const { return map_w_; }
  std::size_t channels() const { return kBackboneFilters.back(); }
  std::size_t embedding_dim() const { return channels() * map_h_ * map_w_; }

 private:
  std::array<nn::Conv2dLayer, 4> convs_;
  std::array<nn::BatchNorm2d, 4> norms_;
  std::size_t frames_ = 0, bins_ = 0, map_h_ = 0, map_w_ = 0;
};

/// Stacks equally sized images along the batch axis.
nn::Tensor concat_batch(const std::vector<nn::Tensor>& images);

}  // namespace sonarfit::models
