#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sonarfit/nn/parameters.hpp"

// Central finite-difference oracle for backward passes.
namespace sonarfit::nn {

struct GradCheckOptions {
  double step = 1e-5;
  /// Larger tensors are probed at this many random coordinates.
  std::size_t max_coords = 48;
  /// Lower bound on the denominator, relative to max(1, |loss|). Parameters
  /// whose true gradient is zero (a batch-norm shift under a
  /// translation-invariant loss) otherwise score ~1 from rounding alone.
  double norm_floor = 1e-5;
};

struct GradCheckResult {
  std::string name;
  double rel_error = 0.0;  // ||a - n|| / max(||a|| + ||n||, floor * max(1, |loss|))
  std::size_t coords = 0;
  /// Coordinates rejected because x +- step crossed a kink of a piecewise op.
  std::size_t skipped = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// `loss_fn` rebuilds the graph from the current leaf values and returns a
/// scalar. Leaf values are perturbed in place and restored. Coordinates whose
/// perturbation changes any branch decision (see BranchTrace) are replaced by
/// other coordinates of the same tensor.
std::vector<GradCheckResult> check_gradients(const std::vector<NamedTensor>& leaves,
                                             const std::function<Tensor()>& loss_fn, Rng& rng,
                                             const GradCheckOptions& opts = {});

std::vector<NamedTensor> trainable_leaves(const ParameterSet& params);

double max_rel_error(const std::vector<GradCheckResult>& results);

}  // namespace sonarfit::nn
