#pragma once

#include "sonarfit/nn/parameters.hpp"

namespace sonarfit::nn {

struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Gradients are rescaled to this global L2 norm when it is exceeded;
  /// 0 disables clipping.
  double clip_norm = 0.0;
  long step = 0;
  std::vector<Array> m;  // per trainable parameter, registration order
  std::vector<Array> v;
};

AdamState make_adam(const ParameterSet& params, double lr);

/// Bias-corrected Adam update of every trainable parameter, then releases the
/// gradients. Throws if a trainable parameter has no gradient.
void adam_step(ParameterSet& params, AdamState& state);

}  // namespace sonarfit::nn
