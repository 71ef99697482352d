#include "sonarfit/nn/adam.hpp"

#include <cmath>

#include "sonarfit/error.hpp"

namespace sonarfit::nn {

AdamState make_adam(const ParameterSet& params, double lr) {
  require(std::isfinite(lr) && lr >= 0.0, "adam: learning rate must be finite and >= 0");
  AdamState s;
  s.lr = lr;
  for (const auto& t : params.trainable()) {
    s.m.emplace_back(t.shape(), 0.0);
    s.v.emplace_back(t.shape(), 0.0);
  }
  return s;
}

void adam_step(ParameterSet& params, AdamState& state) {
  std::vector<Tensor> ps = params.trainable();
  require(ps.size() == state.m.size() && ps.size() == state.v.size(),
          "adam_step: optimizer state does not match the parameter set");
  for (const auto& e : params.entries()) {
    if (e.trainable && !e.tensor.has_grad()) {
      fail(ErrorKind::InvalidArgument, "adam_step: parameter '" + e.name + "' has no gradient");
    }
  }
  double scale = 1.0;
  if (state.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& t : ps) {
      const Array& g = t.grad();
      for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > state.clip_norm) scale = state.clip_norm / norm;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < ps.size(); ++p) {
    Tensor& t = ps[p];
    const Array& grad = t.grad();
    Array& w = t.mutable_value();
    Array& m = state.m[p];
    Array& v = state.v[p];
    require(m.shape() == w.shape(), "adam_step: moment shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = scale * grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
    t.clear_grad();
  }
}

}  // namespace sonarfit::nn
