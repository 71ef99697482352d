#pragma once

#include "sonarfit/nn/tensor.hpp"

// Image ops on [N, C, H, W] tensors.
namespace sonarfit::nn {

/// 3x3 convolution, stride 1, zero 'same' padding. weight [Cout, Cin, 3, 3],
/// bias [Cout].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Per-channel batch norm. In training mode batch statistics (biased variance)
/// normalize the input and the running buffers move towards them:
/// running = momentum * running + (1 - momentum) * batch. In inference mode
/// the running buffers are used and left untouched.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Array& running_mean,
                    Array& running_var, bool training, double momentum = 0.9, double eps = 1e-5);

/// 2x2 max pool, stride 2, trailing odd row/column dropped. Each output's
/// gradient goes to the first maximal cell in row-major order.
Tensor max_pool2d(const Tensor& x);

/// [N, C, h, w] -> [N*h*w, C]: one C-dimensional local descriptor per spatial
/// position, rows ordered by (n, y, x).
Tensor to_descriptors(const Tensor& x);

}  // namespace sonarfit::nn
