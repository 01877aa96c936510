#pragma once

#include <cstdint>

#include "t2d/tensor.hpp"

// Differentiable operations on C×H×W feature maps and small 2D matrices.
// Feature maps carry no batch dimension; batching is a loop in the caller.

namespace t2d::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Real s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Concatenate C×H×W maps along channels. Non-channel extents must agree.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// Channels [begin, begin + count) of a C×H×W map.
Tensor slice_channels(const Tensor& x, int begin, int count);
/// Entries [begin, begin + count) along the leading dimension, any rank.
Tensor slice_leading(const Tensor& x, int begin, int count);

struct Conv2dOptions {
  int stride = 1;
  int pad = 0;
};

/// Direct convolution, x: C_in×H×W, kernel: C_out×C_in×kh×kw, bias: C_out.
/// Each output is accumulated over (c_in, kh, kw) in lexicographic order and
/// the bias is added last.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, Conv2dOptions opt = {});

/// Cells follow the usual adaptive rule: cell i spans
/// [floor(i·In/Out), ceil((i+1)·In/Out)).
Tensor adaptive_avg_pool(const Tensor& x, int out_h, int out_w);

/// Half-pixel bilinear resize (align_corners = false, edge clamped).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

/// Normalization mixing per-channel (instance) and whole-map (layer)
/// statistics with softmax weights: mix holds two logits, gamma/beta are
/// per-channel affine parameters.
Tensor switch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mix,
                   Real eps = Real(1e-5));

/// Plain 2D matrix product; with transpose_b the right operand is used as Bᵀ.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// Row-wise softmax of a 2D matrix.
Tensor softmax_rows(const Tensor& x);

/// Multiply-accumulate counter for conv2d/matmul on the calling thread.
std::uint64_t mac_counter();
void reset_mac_counter();

/// Hash of the active sets of every relu evaluated on this thread since the
/// last reset. Tracking is off until reset_relu_pattern() is called.
std::uint64_t relu_pattern();
void reset_relu_pattern();
void stop_relu_pattern();

}  // namespace t2d::ops
