#pragma once

#include <string>

#include "sonarfit/nn/parameters.hpp"

// Layers register their parameters under "<prefix>.<name>" in a shared
// ParameterSet and keep handles to them.
namespace sonarfit::nn {

class Dense {
 public:
  Dense() = default;
  /// weight [in, out] ~ N(0, 2/in), bias zero.
  Dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
  /// x [N, in] -> [N, out]
  Tensor forward(const Tensor& x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

 private:
  Tensor weight_, bias_;
  std::size_t in_ = 0, out_ = 0;
};

class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  /// 3x3 kernels ~ N(0, 2/(9*in)), bias zero. Without a bias nothing but
  /// the weight is registered.
  Conv2dLayer(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
              Rng& rng, bool with_bias = true);
  Tensor forward(const Tensor& x) const;

 private:
  Tensor weight_, bias_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(ParameterSet& params, const std::string& prefix, std::size_t channels);
  Tensor forward(const Tensor& x, bool training);

 private:
  Tensor gamma_, beta_, running_mean_, running_var_;
};

/// One LSTM direction, gate order (input, forget, cell, output).
class LstmDirection {
 public:
  LstmDirection() = default;
  /// Weights ~ U(-1/sqrt(H), 1/sqrt(H)); biases zero except forget gate 1.
  LstmDirection(ParameterSet& params, const std::string& prefix, std::size_t in,
                std::size_t hidden, Rng& rng);
  /// seq is time-major [T*N, in] (row t*N + n). Returns hidden states
  /// [T*N, H] in time order; `reverse` runs from t = T-1 down to 0.
  Tensor forward(const Tensor& seq, std::size_t steps, std::size_t batch, bool reverse) const;
  std::size_t hidden() const { return hidden_; }

 private:
  Tensor wx_, wh_, bias_;
  std::size_t hidden_ = 0;
};

/// Bidirectional LSTM: [T*N, in] -> [T*N, 2H], forward half first.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden,
         Rng& rng);
  Tensor forward(const Tensor& seq, std::size_t steps, std::size_t batch) const;
  std::size_t hidden() const { return fwd_.hidden(); }

 private:
  LstmDirection fwd_, bwd_;
};

}  // namespace sonarfit::nn
