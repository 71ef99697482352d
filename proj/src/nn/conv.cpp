#include "sonarfit/nn/conv.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sonarfit/error.hpp"

namespace sonarfit::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Dims {
  std::size_t n, c, h, w;
};

Dims image_dims(const Tensor& x, const char* op) {
  require(x.shape().size() == 4,
          std::string(op) + ": expected [N,C,H,W], got " + shape_string(x.shape()));
  const auto& s = x.shape();
  return {s[0], s[1], s[2], s[3]};
}

// cols[(ci*9 + ky*3 + kx), y*W + x] = img[ci, y+ky-1, x+kx-1] (zero outside).
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, RowMat& cols) {
  cols.setZero(static_cast<Eigen::Index>(c * 9), static_cast<Eigen::Index>(h * w));
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* plane = img + ci * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = cols.data() + (ci * 9 + ky * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t x = x0; x < x1; ++x) row[y * w + x] = src[x + kx - 1];
        }
      }
    }
  }
}

void col2im_add(const RowMat& cols, std::size_t c, std::size_t h, std::size_t w, double* img) {
  for (std::size_t ci = 0; ci < c; ++ci) {
    double* plane = img + ci * h * w;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = cols.data() + (ci * 9 + ky * 3 + kx) * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t x = x0; x < x1; ++x) dst[x + kx - 1] += row[y * w + x];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Dims d = image_dims(x, "conv2d");
  require(weight.shape().size() == 4 && weight.shape()[1] == d.c && weight.shape()[2] == 3 &&
              weight.shape()[3] == 3,
          "conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
              shape_string(x.shape()));
  const std::size_t cout = weight.shape()[0];
  require(bias.shape() == Shape{cout}, "conv2d: bias must have shape [Cout]");
  const std::size_t hw = d.h * d.w;
  const auto K = static_cast<Eigen::Index>(d.c * 9);

  Array y({d.n, cout, d.h, d.w});
  const ConstMatMap W(weight.value().data(), static_cast<Eigen::Index>(cout), K);
  const Eigen::Map<const Eigen::VectorXd> b(bias.value().data(), static_cast<Eigen::Index>(cout));
  RowMat cols;
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(x.value().data() + n * d.c * hw, d.c, d.h, d.w, cols);
    MatMap out(y.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
               static_cast<Eigen::Index>(hw));
    out.noalias() = W * cols;
    out.colwise() += b;
  }

  return make_result(std::move(y), {x, weight, bias}, [d, cout, hw, K](detail::Node& self) {
    const Array& xv = self.parent_value(0);
    const ConstMatMap W(self.parent_value(1).data(), static_cast<Eigen::Index>(cout), K);
    Array* gx = self.parent_grad(0);
    Array* gw = self.parent_grad(1);
    Array* gb = self.parent_grad(2);
    RowMat cols;
    RowMat dcols;
    for (std::size_t n = 0; n < d.n; ++n) {
      const ConstMatMap g(self.grad.data() + n * cout * hw, static_cast<Eigen::Index>(cout),
                          static_cast<Eigen::Index>(hw));
      if (gw) {
        im2col(xv.data() + n * d.c * hw, d.c, d.h, d.w, cols);
        MatMap(gw->data(), static_cast<Eigen::Index>(cout), K).noalias() += g * cols.transpose();
      }
      if (gb) {
        Eigen::Map<Eigen::VectorXd>(gb->data(), static_cast<Eigen::Index>(cout)) +=
            g.rowwise().sum();
      }
      if (gx) {
        dcols.noalias() = W.transpose() * g;
        col2im_add(dcols, d.c, d.h, d.w, gx->data() + n * d.c * hw);
      }
    }
  });
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, Array& running_mean,
                    Array& running_var, bool training, double momentum, double eps) {
  const Dims d = image_dims(x, "batch_norm2d");
  const Shape cshape{d.c};
  require(gamma.shape() == cshape && beta.shape() == cshape && running_mean.shape() == cshape &&
              running_var.shape() == cshape,
          "batch_norm2d: per-channel parameters must have shape [C]");
  const std::size_t hw = d.h * d.w;
  const std::size_t m = d.n * hw;
  require(!training || m > 0, "batch_norm2d: empty batch");
  const Array& xv = x.value();

  std::vector<double> mu(d.c), inv_std(d.c);
  for (std::size_t c = 0; c < d.c; ++c) {
    if (training) {
      double s = 0.0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = xv.data() + (n * d.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double mean = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = xv.data() + (n * d.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mean) * (p[i] - mean);
      }
      const double var = v / static_cast<double>(m);
      mu[c] = mean;
      inv_std[c] = 1.0 / std::sqrt(var + eps);
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean;
      running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var;
    } else {
      mu[c] = running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  Array y(x.shape());
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const double* p = xv.data() + (n * d.c + c) * hw;
      double* q = y.data() + (n * d.c + c) * hw;
      const double g = gamma.value()[c] * inv_std[c];
      const double b = beta.value()[c];
      for (std::size_t i = 0; i < hw; ++i) q[i] = g * (p[i] - mu[c]) + b;
    }
  }

  return make_result(std::move(y), {x, gamma, beta},
                     [d, hw, m, mu, inv_std, training](detail::Node& self) {
    const Array& xv = self.parent_value(0);
    const Array& gam = self.parent_value(1);
    Array* gx = self.parent_grad(0);
    Array* gg = self.parent_grad(1);
    Array* gb = self.parent_grad(2);
    for (std::size_t c = 0; c < d.c; ++c) {
      double sum_dy = 0.0;
      double sum_dy_xhat = 0.0;
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = xv.data() + (n * d.c + c) * hw;
        const double* g = self.grad.data() + (n * d.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_dy += g[i];
          sum_dy_xhat += g[i] * (p[i] - mu[c]) * inv_std[c];
        }
      }
      if (gg) (*gg)[c] += sum_dy_xhat;
      if (gb) (*gb)[c] += sum_dy;
      if (!gx) continue;
      const double k = gam[c] * inv_std[c];
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t n = 0; n < d.n; ++n) {
        const double* p = xv.data() + (n * d.c + c) * hw;
        const double* g = self.grad.data() + (n * d.c + c) * hw;
        double* dx = gx->data() + (n * d.c + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          if (training) {
            const double xhat = (p[i] - mu[c]) * inv_std[c];
            dx[i] += k * (g[i] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
          } else {
            dx[i] += k * g[i];
          }
        }
      }
    }
  });
}

Tensor max_pool2d(const Tensor& x) {
  const Dims d = image_dims(x, "max_pool2d");
  const std::size_t oh = d.h / 2;
  const std::size_t ow = d.w / 2;
  require(oh > 0 && ow > 0, "max_pool2d: input " + shape_string(x.shape()) + " too small");
  Array y({d.n, d.c, oh, ow});
  std::vector<std::size_t> argmax(y.size());
  const Array& xv = x.value();
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const double* in = xv.data() + p * d.h * d.w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * d.w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (2 * oy + dy) * d.w + 2 * ox + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = p * oh * ow + oy * ow + ox;
        y[o] = in[best];
        argmax[o] = p * d.h * d.w + best;
      }
    }
  }
  if (BranchTrace* tr = active_branch_trace()) {
    for (std::size_t a : argmax) trace_branch(tr, a);
  }
  return make_result(std::move(y), {x}, [argmax](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t o = 0; o < argmax.size(); ++o) (*g)[argmax[o]] += self.grad[o];
    }
  });
}

Tensor to_descriptors(const Tensor& x) {
  const Dims d = image_dims(x, "to_descriptors");
  const std::size_t hw = d.h * d.w;
  Array y({d.n * hw, d.c});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        y[(n * hw + i) * d.c + c] = x.value()[(n * d.c + c) * hw + i];
      }
    }
  }
  return make_result(std::move(y), {x}, [d, hw](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t c = 0; c < d.c; ++c) {
          for (std::size_t i = 0; i < hw; ++i) {
            (*g)[(n * d.c + c) * hw + i] += self.grad[(n * hw + i) * d.c + c];
          }
        }
      }
    }
  });
}

}  // namespace sonarfit::nn
