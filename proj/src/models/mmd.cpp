#include "sonarfit/models/mmd.hpp"

#include "sonarfit/error.hpp"
#include "sonarfit/nn/ops.hpp"

namespace sonarfit::models {

nn::Tensor mmd(const nn::Tensor& x, const nn::Tensor& y, const MmdOptions& opts) {
  require(x.shape().size() == 2 && y.shape().size() == 2, "mmd: inputs must be matrices");
  const std::size_t n = x.shape()[0];
  const std::size_t m = y.shape()[0];
  require(n >= 1 && m >= 1, "mmd: empty sample set");
  require(x.shape()[1] == y.shape()[1], "mmd: feature dimensions differ");
  require(!opts.multipliers.empty(), "mmd: no kernel bandwidths");

  const nn::Tensor z = nn::concat_rows({x, y});
  const nn::Tensor d2 = nn::pairwise_sqdist(z, z);

  nn::Tensor base;
  if (opts.fixed_bandwidth > 0.0) {
    base = nn::Tensor::constant(nn::Array({1}, opts.fixed_bandwidth));
  } else {
    base = nn::median_pairwise_distance(d2);
    if (base.item() <= 1e-12) base = nn::Tensor::constant(nn::Array({1}, 1.0));
  }
  const nn::Tensor inv_base2 = nn::reciprocal(nn::square(base));

  nn::Tensor kernel;
  for (double mult : opts.multipliers) {
    require(mult > 0.0, "mmd: bandwidth multipliers must be positive");
    const nn::Tensor k =
        nn::exp(nn::mul_scalar(d2, nn::scale(inv_base2, -1.0 / (2.0 * mult * mult))));
    kernel = kernel.defined() ? nn::add(kernel, k) : k;
  }
  kernel = nn::scale(kernel, 1.0 / static_cast<double>(opts.multipliers.size()));

  const std::size_t total = n + m;
  nn::Array w({total, total});
  const double wxx = 1.0 / static_cast<double>(n * n);
  const double wyy = 1.0 / static_cast<double>(m * m);
  const double wxy = -1.0 / static_cast<double>(n * m);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t j = 0; j < total; ++j) {
      const bool xi = i < n, xj = j < n;
      w[i * total + j] = xi && xj ? wxx : (!xi && !xj ? wyy : wxy);
    }
  }
  return nn::weighted_sum(kernel, w);
}

}  // namespace sonarfit::models
