#include "sonarfit/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "sonarfit/error.hpp"

namespace sonarfit::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_mat(const Array& a) {
  return ConstMatMap(a.data(), static_cast<Eigen::Index>(a.dim(0)),
                     static_cast<Eigen::Index>(a.dim(1)));
}
MatMap as_mat(Array& a) {
  return MatMap(a.data(), static_cast<Eigen::Index>(a.dim(0)), static_cast<Eigen::Index>(a.dim(1)));
}

void expect_matrix(const Tensor& x, const char* op) {
  require(x.shape().size() == 2,
          std::string(op) + ": expected a matrix, got shape " + shape_string(x.shape()));
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// y = f(x) elementwise; df(x, y) is dy/dx.
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  Array y(x.shape());
  const Array& xv = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_result(std::move(y), {x}, [df](detail::Node& self) {
    Array* gx = self.parent_grad(0);
    if (!gx) return;
    const Array& xv = self.parent_value(0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      (*gx)[i] += self.grad[i] * df(xv[i], self.value[i]);
    }
  });
}

void trace_signs(const Array& v) {
  if (BranchTrace* tr = active_branch_trace()) {
    for (std::size_t i = 0; i < v.size(); ++i) trace_branch(tr, v[i] >= 0.0 ? i : ~i);
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  Array y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return make_result(std::move(y), {a, b}, [](detail::Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Array* g = self.parent_grad(p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "sub");
  Array y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return make_result(std::move(y), {a, b}, [](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Array* g = self.parent_grad(1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  Array y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return make_result(std::move(y), {a, b}, [](detail::Node& self) {
    const Array& av = self.parent_value(0);
    const Array& bv = self.parent_value(1);
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Array* g = self.parent_grad(1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  Array y = x.value();
  for (double& v : y.values()) v *= factor;
  return make_result(std::move(y), {x}, [factor](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += factor * self.grad[i];
    }
  });
}

Tensor mul_scalar(const Tensor& x, const Tensor& s) {
  require(s.size() == 1, "mul_scalar: scale must hold one element");
  const double k = s.value()[0];
  Array y = x.value();
  for (double& v : y.values()) v *= k;
  return make_result(std::move(y), {x, s}, [](detail::Node& self) {
    const Array& xv = self.parent_value(0);
    const double k = self.parent_value(1)[0];
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += k * self.grad[i];
    }
    if (Array* g = self.parent_grad(1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) acc += self.grad[i] * xv[i];
      (*g)[0] += acc;
    }
  });
}

Tensor reciprocal(const Tensor& x) {
  return unary(x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor abs(const Tensor& x) {
  trace_signs(x.value());
  return unary(x, [](double v) { return std::abs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  trace_signs(x.value());
  return unary(x, [negative_slope](double v) { return v >= 0.0 ? v : negative_slope * v; },
               [negative_slope](double v, double) { return v >= 0.0 ? 1.0 : negative_slope; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return make_result(Array({1}, acc), {x}, [](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (double& v : g->values()) v += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor weighted_sum(const Tensor& x, const Array& weights) {
  require(weights.size() == x.size(), "weighted_sum: weight count does not match tensor size");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += weights[i] * x.value()[i];
  return make_result(Array({1}, acc), {x}, [weights](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[0] * weights[i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect_matrix(a, "matmul");
  expect_matrix(b, "matmul");
  require(a.shape()[1] == b.shape()[0], "matmul: inner dimensions differ " +
                                            shape_string(a.shape()) + " x " +
                                            shape_string(b.shape()));
  Array y({a.shape()[0], b.shape()[1]});
  as_mat(y).noalias() = as_mat(a.value()) * as_mat(b.value());
  return make_result(std::move(y), {a, b}, [](detail::Node& self) {
    const Array& g = self.grad;
    if (Array* ga = self.parent_grad(0)) {
      as_mat(*ga).noalias() += as_mat(g) * as_mat(self.parent_value(1)).transpose();
    }
    if (Array* gb = self.parent_grad(1)) {
      as_mat(*gb).noalias() += as_mat(self.parent_value(0)).transpose() * as_mat(g);
    }
  });
}

Tensor transpose(const Tensor& x) {
  expect_matrix(x, "transpose");
  Array y({x.shape()[1], x.shape()[0]});
  as_mat(y) = as_mat(x.value()).transpose();
  return make_result(std::move(y), {x}, [](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) as_mat(*g) += as_mat(self.grad).transpose();
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  expect_matrix(x, "add_bias");
  require(bias.shape() == Shape{x.shape()[1]},
          "add_bias: bias " + shape_string(bias.shape()) + " does not match " +
              shape_string(x.shape()));
  const std::size_t n = x.shape()[0];
  const std::size_t c = x.shape()[1];
  Array y = x.value();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < c; ++j) y[r * c + j] += bias.value()[j];
  }
  return make_result(std::move(y), {x, bias}, [n, c](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Array* g = self.parent_grad(1)) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < c; ++j) (*g)[j] += self.grad[r * c + j];
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  Array y = x.value();
  y.reshape(std::move(shape));
  return make_result(std::move(y), {x}, [](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  expect_matrix(x, "slice_rows");
  require(begin + count <= x.shape()[0], "slice_rows: range exceeds row count");
  const std::size_t cols = x.shape()[1];
  const double* src = x.value().data() + begin * cols;
  Array y({count, cols}, std::vector<double>(src, src + count * cols));
  return make_result(std::move(y), {x}, [begin, cols](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      double* dst = g->data() + begin * cols;
      for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  expect_matrix(x, "slice_cols");
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  require(begin + count <= cols, "slice_cols: range exceeds column count");
  Array y({rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.value().data() + r * cols + begin, count, y.data() + r * count);
  }
  return make_result(std::move(y), {x}, [rows, cols, begin, count](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < count; ++j) {
          (*g)[r * cols + begin + j] += self.grad[r * count + j];
        }
      }
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = parts.front().shape().at(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    expect_matrix(p, "concat_rows");
    require(p.shape()[1] == cols, "concat_rows: column counts differ");
    rows += p.shape()[0];
  }
  Array y({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), y.data() + offset);
    offset += p.size();
  }
  return make_result(std::move(y), parts, [](detail::Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t n = self.parent_value(p).size();
      if (Array* g = self.parent_grad(p)) {
        for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts.front().shape().at(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    expect_matrix(p, "concat_cols");
    require(p.shape()[0] == rows, "concat_cols: row counts differ");
    cols += p.shape()[1];
  }
  Array y({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p.value().data() + r * w, w, y.data() + r * cols + offset);
    }
    offset += w;
  }
  return make_result(std::move(y), parts, [rows, cols](detail::Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t w = self.parent_value(p).dim(1);
      if (Array* g = self.parent_grad(p)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) (*g)[r * w + j] += self.grad[r * cols + offset + j];
        }
      }
      offset += w;
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  expect_matrix(x, "gather_rows");
  const std::size_t cols = x.shape()[1];
  Array y({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < x.shape()[0], "gather_rows: row index out of range");
    std::copy_n(x.value().data() + rows[i] * cols, cols, y.data() + i * cols);
  }
  return make_result(std::move(y), {x}, [rows, cols](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) (*g)[rows[i] * cols + j] += self.grad[i * cols + j];
      }
    }
  });
}

Tensor row_sum(const Tensor& x) {
  expect_matrix(x, "row_sum");
  const std::size_t n = x.shape()[0];
  const std::size_t m = x.shape()[1];
  Array y({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += x.value()[r * m + j];
    y[r] = acc;
  }
  return make_result(std::move(y), {x}, [n, m](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < m; ++j) (*g)[r * m + j] += self.grad[r];
      }
    }
  });
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
  expect_matrix(a, "pairwise_sqdist");
  expect_matrix(b, "pairwise_sqdist");
  require(a.shape()[1] == b.shape()[1], "pairwise_sqdist: feature dimensions differ");
  const std::size_t n = a.shape()[0], m = b.shape()[0], d = a.shape()[1];
  // Summed squared differences rather than |a|^2 + |b|^2 - 2ab: no
  // cancellation, and identical rows give exactly zero.
  Array y({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.value().data() + i * d;
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.value().data() + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += (ai[k] - bj[k]) * (ai[k] - bj[k]);
      y[i * m + j] = acc;
    }
  }
  return make_result(std::move(y), {a, b}, [](detail::Node& self) {
    const auto A = as_mat(self.parent_value(0));
    const auto B = as_mat(self.parent_value(1));
    const auto G = as_mat(self.grad);
    if (Array* ga = self.parent_grad(0)) {
      as_mat(*ga) += 2.0 * (G.rowwise().sum().asDiagonal() * A - G * B);
    }
    if (Array* gb = self.parent_grad(1)) {
      as_mat(*gb) += 2.0 * (G.colwise().sum().transpose().asDiagonal() * B - G.transpose() * A);
    }
  });
}

Tensor pairwise_absdiff(const Tensor& queries, const Tensor& centers) {
  expect_matrix(queries, "pairwise_absdiff");
  expect_matrix(centers, "pairwise_absdiff");
  const std::size_t q = queries.shape()[0];
  const std::size_t c = centers.shape()[0];
  const std::size_t e = queries.shape()[1];
  require(centers.shape()[1] == e, "pairwise_absdiff: feature dimensions differ");
  Array y({q * c, e});
  const Array& qv = queries.value();
  const Array& cv = centers.value();
  for (std::size_t i = 0; i < q; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t j = 0; j < e; ++j) {
        y[(i * c + k) * e + j] = std::abs(qv[i * e + j] - cv[k * e + j]);
      }
    }
  }
  return make_result(std::move(y), {queries, centers}, [q, c, e](detail::Node& self) {
    const Array& qv = self.parent_value(0);
    const Array& cv = self.parent_value(1);
    Array* gq = self.parent_grad(0);
    Array* gc = self.parent_grad(1);
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        for (std::size_t j = 0; j < e; ++j) {
          const double d = qv[i * e + j] - cv[k * e + j];
          const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
          const double g = self.grad[(i * c + k) * e + j] * s;
          if (gq) (*gq)[i * e + j] += g;
          if (gc) (*gc)[k * e + j] -= g;
        }
      }
    }
  });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  expect_matrix(x, "l2_normalize_rows");
  const std::size_t n = x.shape()[0];
  const std::size_t d = x.shape()[1];
  Array y({n, d});
  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x.value()[r * d + j] * x.value()[r * d + j];
    norms[r] = std::sqrt(s + eps);
    for (std::size_t j = 0; j < d; ++j) y[r * d + j] = x.value()[r * d + j] / norms[r];
  }
  return make_result(std::move(y), {x}, [n, d, norms](detail::Node& self) {
    Array* gx = self.parent_grad(0);
    if (!gx) return;
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += self.grad[r * d + j] * self.value[r * d + j];
      for (std::size_t j = 0; j < d; ++j) {
        (*gx)[r * d + j] += (self.grad[r * d + j] - self.value[r * d + j] * dot) / norms[r];
      }
    }
  });
}

Tensor topk_row_sum(const Tensor& x, std::size_t k) {
  expect_matrix(x, "topk_row_sum");
  const std::size_t n = x.shape()[0];
  const std::size_t m = x.shape()[1];
  require(k >= 1 && k <= m, "topk_row_sum: k=" + std::to_string(k) + " but only " +
                                std::to_string(m) + " candidates per row");
  Array y({n, 1});
  std::vector<std::size_t> chosen(n * k);
  std::vector<std::size_t> order(m);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.value().data() + r * m;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [row](std::size_t a, std::size_t b) {
                        return row[a] > row[b] || (row[a] == row[b] && a < b);
                      });
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      chosen[r * k + i] = order[i];
      acc += row[order[i]];
    }
    y[r] = acc;
  }
  if (BranchTrace* tr = active_branch_trace()) {
    for (std::size_t c : chosen) trace_branch(tr, c);
  }
  return make_result(std::move(y), {x}, [n, m, k, chosen](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < k; ++i) (*g)[r * m + chosen[r * k + i]] += self.grad[r];
      }
    }
  });
}

Tensor class_means(const Tensor& emb, const std::vector<int>& labels, std::size_t n_classes) {
  expect_matrix(emb, "class_means");
  const std::size_t s = emb.shape()[0];
  const std::size_t e = emb.shape()[1];
  require(labels.size() == s, "class_means: one label per row required");
  std::vector<std::vector<std::size_t>> members(n_classes);
  for (std::size_t r = 0; r < s; ++r) {
    require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < n_classes,
            "class_means: label out of range");
    members[static_cast<std::size_t>(labels[r])].push_back(r);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    require(!members[c].empty(), "class_means: class " + std::to_string(c) + " has no support");
  }
  Array y({n_classes, e});
  std::vector<double> column;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t j = 0; j < e; ++j) {
      column.clear();
      for (std::size_t r : members[c]) column.push_back(emb.value()[r * e + j]);
      std::sort(column.begin(), column.end());
      double acc = 0.0;
      for (double v : column) acc += v;
      y[c * e + j] = acc / static_cast<double>(column.size());
    }
  }
  return make_result(std::move(y), {emb}, [members, e](detail::Node& self) {
    if (Array* g = self.parent_grad(0)) {
      for (std::size_t c = 0; c < members.size(); ++c) {
        const double inv = 1.0 / static_cast<double>(members[c].size());
        for (std::size_t r : members[c]) {
          for (std::size_t j = 0; j < e; ++j) (*g)[r * e + j] += self.grad[c * e + j] * inv;
        }
      }
    }
  });
}

Tensor median_pairwise_distance(const Tensor& d2) {
  expect_matrix(d2, "median_pairwise_distance");
  const std::size_t n = d2.shape()[0];
  require(d2.shape()[1] == n && n >= 2, "median_pairwise_distance: need a square matrix, n >= 2");
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(d2.value()[i * n + j], i, j);
  }
  std::sort(pairs.begin(), pairs.end());
  const std::size_t m = pairs.size();
  std::vector<std::pair<std::size_t, double>> picks;  // flat index, weight
  if (m % 2 == 1) {
    picks.emplace_back(std::get<1>(pairs[m / 2]) * n + std::get<2>(pairs[m / 2]), 1.0);
  } else {
    for (std::size_t idx : {m / 2 - 1, m / 2}) {
      picks.emplace_back(std::get<1>(pairs[idx]) * n + std::get<2>(pairs[idx]), 0.5);
    }
  }
  if (BranchTrace* tr = active_branch_trace()) {
    for (const auto& pick : picks) trace_branch(tr, pick.first);
  }
  double median = 0.0;
  for (const auto& [flat, w] : picks) median += w * std::sqrt(std::max(d2.value()[flat], 0.0));
  return make_result(Array({1}, median), {d2}, [picks](detail::Node& self) {
    Array* g = self.parent_grad(0);
    if (!g) return;
    const Array& v = self.parent_value(0);
    for (const auto& [flat, w] : picks) {
      if (v[flat] > 0.0) (*g)[flat] += self.grad[0] * w / (2.0 * std::sqrt(v[flat]));
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  expect_matrix(logits, "softmax_cross_entropy");
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  require(n >= 1, "softmax_cross_entropy: empty batch");
  require(labels.size() == n, "softmax_cross_entropy: one label per row required");
  std::vector<int> lab(labels.begin(), labels.end());
  for (int l : lab) {
    require(l >= 0 && static_cast<std::size_t>(l) < c,
            "softmax_cross_entropy: label " + std::to_string(l) + " outside [0, " +
                std::to_string(c) + ")");
  }
  Array probs = softmax_rows(logits.value());
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = logits.value().data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    loss += mx + std::log(z) - row[lab[r]];
  }
  loss /= static_cast<double>(n);
  return make_result(Array({1}, loss), {logits}, [probs, lab, n, c](detail::Node& self) {
    Array* g = self.parent_grad(0);
    if (!g) return;
    const double k = self.grad[0] / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < c; ++j) {
        const double target = static_cast<int>(j) == lab[r] ? 1.0 : 0.0;
        (*g)[r * c + j] += k * (probs[r * c + j] - target);
      }
    }
  });
}

Array softmax_rows(const Array& logits) {
  require(logits.rank() == 2, "softmax_rows: expected a matrix");
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  Array p(logits.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = logits.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      p[r * c + j] = std::exp(row[j] - mx);
      z += p[r * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) p[r * c + j] /= z;
  }
  return p;
}

std::vector<int> argmax_rows(const Array& x) {
  require(x.rank() == 2, "argmax_rows: expected a matrix");
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  std::vector<int> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (x[r * c + j] > x[r * c + best]) best = j;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace sonarfit::nn
