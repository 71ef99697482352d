#include "sonarfit/models/backbone.hpp"

#include <algorithm>

#include "sonarfit/error.hpp"
#include "sonarfit/nn/conv.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::models {

ConvBackbone::ConvBackbone(nn::ParameterSet& params, std::size_t frames, std::size_t bins,
                           nn::Rng& rng)
    : frames_(frames), bins_(bins) {
  std::size_t h = frames, w = bins, in = 1;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string prefix = "feature.block" + std::to_string(b + 1);
    // Batch norm subtracts the channel mean right after, so a conv bias
    // would be a parameter with identically zero gradient.
    convs_[b] = nn::Conv2dLayer(params, prefix + ".conv", in, kBackboneFilters[b], rng, false);
    norms_[b] = nn::BatchNorm2d(params, prefix + ".bn", kBackboneFilters[b]);
    in = kBackboneFilters[b];
    h /= 2;
    w /= 2;
    require(h > 0 && w > 0, "ConvBackbone: input " + std::to_string(frames) + "x" +
                                std::to_string(bins) + " too small for four 2x2 pools");
  }
  map_h_ = h;
  map_w_ = w;
}

BackboneOutput ConvBackbone::forward(const nn::Tensor& images, bool training) {
  const auto& s = images.shape();
  require(s.size() == 4 && s[1] == 1 && s[2] == frames_ && s[3] == bins_,
          "ConvBackbone: expected [N,1," + std::to_string(frames_) + "," + std::to_string(bins_) +
              "], got " + nn::shape_string(s));
  nn::Tensor x = images;
  for (std::size_t b = 0; b < 4; ++b) {
    x = convs_[b].forward(x);
    x = norms_[b].forward(x, training);
    x = nn::leaky_relu(x, kLeakySlope);
    x = nn::max_pool2d(x);
  }
  BackboneOutput out;
  out.feature_map = x;
  out.embedding = nn::reshape(x, {s[0], embedding_dim()});
  return out;
}

nn::Tensor concat_batch(const std::vector<nn::Tensor>& images) {
  require(!images.empty(), "concat_batch: no inputs");
  nn::Shape item = images.front().shape();
  require(item.size() >= 2, "concat_batch: inputs need a batch axis");
  const std::size_t per = nn::shape_size(item) / item[0];
  std::vector<nn::Tensor> flat;
  std::size_t total = 0;
  for (const auto& im : images) {
    const auto& s = im.shape();
    require(s.size() == item.size() && std::equal(s.begin() + 1, s.end(), item.begin() + 1),
            "concat_batch: image shapes differ");
    flat.push_back(nn::reshape(im, {s[0], per}));
    total += s[0];
  }
  item[0] = total;
  return nn::reshape(nn::concat_rows(flat), item);
}

}  // namespace sonarfit::models
