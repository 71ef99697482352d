#pragma once

#include <span>
#include <vector>

#include "sonarfit/nn/tensor.hpp"

// Differentiable primitives. Shapes are checked on entry; mismatches throw
// InvalidArgument. Matrices are rank-2 row-major.
namespace sonarfit::nn {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x * s where s holds a single element.
Tensor mul_scalar(const Tensor& x, const Tensor& s);
Tensor reciprocal(const Tensor& x);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.2);

// Reductions to a single-element tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum_i w_i x_i with a constant weight array of x's size.
Tensor weighted_sum(const Tensor& x, const Array& weights);

// Matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
/// x[N x C] + bias[C] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);
/// [n x m] -> [n x 1] row sums.
Tensor row_sum(const Tensor& x);

// Metric-learning helpers.
/// out[i][j] = ||a_i - b_j||^2.
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);
/// Row q*C + c of the result is |query_q - centers_c| elementwise.
Tensor pairwise_absdiff(const Tensor& queries, const Tensor& centers);
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);
/// Per row, the sum of the k largest entries ([n x m] -> [n x 1]); ties go
/// to the lowest column index.
Tensor topk_row_sum(const Tensor& x, std::size_t k);
/// Per-class mean of rows of emb [S x E] -> [C x E]. Each coordinate is summed
/// in ascending value order, so permuting rows within a class leaves the
/// result bit-identical.
Tensor class_means(const Tensor& emb, const std::vector<int>& labels, std::size_t n_classes);
/// Median of sqrt(d2[i][j]) over i < j of a square pairwise squared-distance
/// matrix; differentiable through the selected entries.
Tensor median_pairwise_distance(const Tensor& d2);

// Losses.
/// Mean over rows of -log softmax(logits)[label], max-subtracted.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Non-differentiable helpers.
Array softmax_rows(const Array& logits);
/// Column of the largest entry per row; ties go to the lowest index.
std::vector<int> argmax_rows(const Array& x);

}  // namespace sonarfit::nn
