#include "sonarfit/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sonarfit/error.hpp"

namespace sonarfit::nn {

std::vector<GradCheckResult> check_gradients(const std::vector<NamedTensor>& leaves,
                                             const std::function<Tensor()>& loss_fn, Rng& rng,
                                             const GradCheckOptions& opts) {
  for (const auto& l : leaves) {
    require(l.tensor.requires_grad(), "check_gradients: '" + l.name + "' does not require grad");
    Tensor(l.tensor).clear_grad();
  }
  const Tensor base = loss_fn();
  const double base_loss = base.item();
  base.backward();
  std::uint64_t base_branches = 0;
  {
    NoGradGuard guard;
    BranchTrace trace;
    loss_fn();
    base_branches = trace.digest();
  }
  const double floor = opts.norm_floor * std::max(1.0, std::abs(base_loss));

  // Loss at the current leaf values; false if the branch pattern differs
  // from the base point's.
  auto probe = [&](double& out) {
    NoGradGuard guard;
    BranchTrace trace;
    out = loss_fn().item();
    return trace.digest() == base_branches;
  };

  std::vector<GradCheckResult> results;
  for (const auto& l : leaves) {
    Tensor t = l.tensor;
    const std::size_t n = t.size();
    const Array analytic = t.has_grad() ? t.grad() : Array(t.shape(), 0.0);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (n > opts.max_coords) std::shuffle(order.begin(), order.end(), rng);

    GradCheckResult r;
    r.name = l.name;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t idx : order) {
      if (r.coords == opts.max_coords) break;
      Array& v = t.mutable_value();
      const double saved = v[idx];
      double plus = 0.0, minus = 0.0;
      v[idx] = saved + opts.step;
      bool smooth = probe(plus);
      v[idx] = saved - opts.step;
      smooth = probe(minus) && smooth;
      v[idx] = saved;
      if (!smooth) {
        ++r.skipped;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * opts.step);
      diff2 += (analytic[idx] - numeric) * (analytic[idx] - numeric);
      a2 += analytic[idx] * analytic[idx];
      n2 += numeric * numeric;
      ++r.coords;
    }
    r.rel_error = std::sqrt(diff2) / std::max(std::sqrt(a2) + std::sqrt(n2), floor);
    results.push_back(r);
    t.clear_grad();
  }
  return results;
}

std::vector<NamedTensor> trainable_leaves(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  for (const auto& e : params.entries()) {
    if (e.trainable) out.push_back({e.name, e.tensor});
  }
  return out;
}

double max_rel_error(const std::vector<GradCheckResult>& results) {
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.rel_error);
  return worst;
}

}  // namespace sonarfit::nn
