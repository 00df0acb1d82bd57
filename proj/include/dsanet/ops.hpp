#pragma once

#include <vector>

#include "dsanet/autograd.hpp"

// Differentiable tensor primitives. Feature maps are (C, H, W); matrices are
// (rows, cols). Every op records a backward closure on the tape unless
// recording is disabled with NoGradGuard.
namespace dsanet::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);

// Sum / mean of all elements, returned with shape ().
Var sum(const Var& a);
Var mean(const Var& a);

Var reshape(const Var& a, Shape shape);

// 2-D convolution of x (C, H, W) with weight (O, C, k, k) and optional bias (O).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

// Bilinear resize of (C, h, w) to (C, H, W) with half-pixel centers
// (align_corners = false).
Var upsample_bilinear(const Var& x, int height, int width);

// Concatenate / slice along the leading (channel) axis.
Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, int begin, int end);

// x / sqrt(mean(x^2) + eps) over the whole tensor.
Var rms_normalize(const Var& x, double eps = 1e-12);

// Per-channel spatial mean: (C, ...) -> (C).
Var global_avg_pool(const Var& x);

// out[c, ...] = x[c, ...] * gain[c].
Var channel_scale(const Var& x, const Var& gain);

// (C) -> (C, n) by repeating each entry along columns.
Var expand_cols(const Var& v, int n);

// Row-wise cosine of two (C, N) matrices: <a_c, b_c> / (|a_c| |b_c| + eps).
// Rows where either norm is exactly zero yield 0 and pass no gradient.
Var rowwise_cosine(const Var& a, const Var& b, double eps);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var softmax_rows(const Var& a);
// x (N, D) + bias (D) broadcast over rows.
Var add_row_bias(const Var& x, const Var& bias);

}  // namespace dsanet::ops
