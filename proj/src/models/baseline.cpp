#include "sonarfit/models/baseline.hpp"

#include "sonarfit/error.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::models {

BaselineModel::BaselineModel(nn::ParameterSet& params, std::size_t bins, std::size_t hidden,
                             std::size_t n_classes, nn::Rng& rng)
    : lstm1_(params, "feature.lstm1", bins, hidden, rng),
      lstm2_(params, "feature.lstm2", 2 * hidden, hidden, rng),
      head_(params, "classifier.dense", 2 * hidden, n_classes, rng),
      hidden_(hidden) {}

nn::Tensor BaselineModel::logits(const nn::Tensor& seq, std::size_t frames,
                                 std::size_t batch) const {
  require(frames >= 1 && batch >= 1, "BaselineModel: empty input");
  const nn::Tensor h1 = lstm1_.forward(seq, frames, batch);
  const nn::Tensor h2 = lstm2_.forward(h1, frames, batch);
  const nn::Tensor last_fwd = nn::slice_cols(nn::slice_rows(h2, (frames - 1) * batch, batch), 0, hidden_);
  const nn::Tensor first_bwd = nn::slice_cols(nn::slice_rows(h2, 0, batch), hidden_, hidden_);
  return head_.forward(nn::concat_cols({last_fwd, first_bwd}));
}

}  // namespace sonarfit::models
