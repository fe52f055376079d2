#pragma once

#include <vector>

#include "dirfocus/nn/tensor.hpp"

namespace dirfocus::nn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, const Shape& shape);
/// [B, ...] -> [B, prod(...)].
Tensor flatten(const Tensor& a);
Tensor relu(const Tensor& a);

/// y = x W^T + b with x [B, I], W [O, I], b [O] (b may be undefined).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Cross-correlation over 1-3 trailing spatial axes.
/// x [B, Cin, D...], w [Cout, Cin, K...], b [Cout] or undefined.
/// Output [B, Cout, O...] with O = floor((D + 2 pad - K) / stride) + 1.
/// `stride` and `padding` hold one entry per spatial axis (empty = 1 / 0).
Tensor conv(const Tensor& x, const Tensor& w, const Tensor& b, std::vector<Index> stride = {},
            std::vector<Index> padding = {});

/// Per-channel batch normalization of x [B, C, ...] over the batch and all
/// trailing axes. Training mode normalizes with the batch statistics and
/// updates the running estimates in place (momentum weights the new batch;
/// the variance estimate is unbiased); evaluation mode uses the running
/// estimates.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean, Tensor& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);

/// Mean over windows of the last axis: [..., T] -> [..., (T - window) / stride + 1].
/// With `ceil_mode` a trailing partial window is kept and averaged over the
/// samples it holds, so every input position reaches the output.
Tensor avg_pool_last(const Tensor& x, Index window, Index stride, bool ceil_mode = false);

/// Concatenation along the last axis; all leading axes must agree.
Tensor concat_last(const Tensor& a, const Tensor& b);

/// Row-wise softmax of a [B, N] matrix of logits.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& logits);

struct CrossEntropy {
  Tensor loss;                  // scalar mean over the batch
  Eigen::MatrixXd probabilities;  // [B, N]
};

/// Mean softmax cross-entropy of logits [B, N] against integer labels.
CrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace dirfocus::nn
