#pragma once

#include "sonarfit/nn/layers.hpp"

namespace sonarfit::models {

/// Two stacked bidirectional LSTMs over the frames of a window, then a dense
/// layer on [forward state at the last frame, backward state at frame 0].
class BaselineModel {
 public:
  BaselineModel() = default;
  BaselineModel(nn::ParameterSet& params, std::size_t bins, std::size_t hidden,
                std::size_t n_classes, nn::Rng& rng);

  /// seq is time-major [frames*N, bins]; returns logits [N, n_classes].
  nn::Tensor logits(const nn::Tensor& seq, std::size_t frames, std::size_t batch) const;

 private:
  nn::BiLstm lstm1_, lstm2_;
  nn::Dense head_;
  std::size_t hidden_ = 0;
};

}  // namespace sonarfit::models
