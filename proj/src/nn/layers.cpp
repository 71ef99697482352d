#include "sonarfit/nn/layers.hpp"

#include <cmath>

#include "sonarfit/error.hpp"
#include "sonarfit/nn/conv.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::nn {

Dense::Dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
             Rng& rng)
    : in_(in), out_(out) {
  require(in > 0 && out > 0, "Dense: zero-sized layer");
  weight_ = params.add(prefix + ".weight", normal_init({in, out}, std::sqrt(2.0 / in), rng));
  bias_ = params.add(prefix + ".bias", Array({out}, 0.0));
}

Tensor Dense::forward(const Tensor& x) const { return add_bias(matmul(x, weight_), bias_); }

Conv2dLayer::Conv2dLayer(ParameterSet& params, const std::string& prefix, std::size_t in,
                         std::size_t out, Rng& rng, bool with_bias) {
  require(in > 0 && out > 0, "Conv2dLayer: zero-sized layer");
  weight_ = params.add(prefix + ".weight",
                       normal_init({out, in, 3, 3}, std::sqrt(2.0 / (9.0 * in)), rng));
  bias_ = with_bias ? params.add(prefix + ".bias", Array({out}, 0.0))
                    : Tensor::constant(Array({out}, 0.0));
}

Tensor Conv2dLayer::forward(const Tensor& x) const { return conv2d(x, weight_, bias_); }

BatchNorm2d::BatchNorm2d(ParameterSet& params, const std::string& prefix, std::size_t channels) {
  gamma_ = params.add(prefix + ".gamma", Array({channels}, 1.0));
  beta_ = params.add(prefix + ".beta", Array({channels}, 0.0));
  running_mean_ = params.add(prefix + ".running_mean", Array({channels}, 0.0), false);
  running_var_ = params.add(prefix + ".running_var", Array({channels}, 1.0), false);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  return batch_norm2d(x, gamma_, beta_, running_mean_.mutable_value(),
                      running_var_.mutable_value(), training);
}

LstmDirection::LstmDirection(ParameterSet& params, const std::string& prefix, std::size_t in,
                             std::size_t hidden, Rng& rng)
    : hidden_(hidden) {
  require(in > 0 && hidden > 0, "LstmDirection: zero-sized layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  wx_ = params.add(prefix + ".wx", uniform_init({in, 4 * hidden}, bound, rng));
  wh_ = params.add(prefix + ".wh", uniform_init({hidden, 4 * hidden}, bound, rng));
  Array b({4 * hidden}, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  bias_ = params.add(prefix + ".bias", std::move(b));
}

Tensor LstmDirection::forward(const Tensor& seq, std::size_t steps, std::size_t batch,
                              bool reverse) const {
  require(steps >= 1, "LstmDirection: need at least one time step");
  require(seq.shape().size() == 2 && seq.shape()[0] == steps * batch,
          "LstmDirection: sequence shape " + shape_string(seq.shape()) + " does not match " +
              std::to_string(steps) + " steps x " + std::to_string(batch) + " samples");
  const std::size_t H = hidden_;
  const Tensor proj = add_bias(matmul(seq, wx_), bias_);
  Tensor h = Tensor::constant(Array({batch, H}, 0.0));
  Tensor c = Tensor::constant(Array({batch, H}, 0.0));
  std::vector<Tensor> outputs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    const Tensor gates = add(slice_rows(proj, t * batch, batch), matmul(h, wh_));
    const Tensor i = sigmoid(slice_cols(gates, 0, H));
    const Tensor f = sigmoid(slice_cols(gates, H, H));
    const Tensor g = tanh(slice_cols(gates, 2 * H, H));
    const Tensor o = sigmoid(slice_cols(gates, 3 * H, H));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    outputs[t] = h;
  }
  return concat_rows(outputs);
}

BiLstm::BiLstm(ParameterSet& params, const std::string& prefix, std::size_t in,
               std::size_t hidden, Rng& rng)
    : fwd_(params, prefix + ".fwd", in, hidden, rng), bwd_(params, prefix + ".bwd", in, hidden, rng) {}

Tensor BiLstm::forward(const Tensor& seq, std::size_t steps, std::size_t batch) const {
  return concat_cols({fwd_.forward(seq, steps, batch, false), bwd_.forward(seq, steps, batch, true)});
}

}  // namespace sonarfit::nn
