#pragma once

#include "msnet/tensor.hpp"

namespace msnet {

// 2-D cross-correlation over N x Cin x H x W input with a Cout x Cin x k x k
// kernel (k odd) and per-output-channel bias. Output spatial extents are
// (H + 2*padding - k)/stride + 1. Differentiable w.r.t. input, weight, bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

Tensor relu(const Tensor& input);

// Numerically stable elementwise logistic function.
Tensor sigmoid(const Tensor& input);

// Elementwise |a - b|. Backward routes sign(a-b) to a and -sign(a-b) to b,
// with sign(0) = 0.
Tensor sub_abs(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor sum(const Tensor& a);   // scalar result, shape {1}
Tensor mean(const Tensor& a);  // scalar result, shape {1}

// min(max(x, lo), hi); gradient passes only strictly inside (lo, hi).
Tensor clamp(const Tensor& a, double lo, double hi);

// Natural log; rejects non-positive inputs.
Tensor log(const Tensor& a);

// Elementwise sqrt with a smoothed derivative: forward computes sqrt(x)
// exactly, backward uses 0.5 / sqrt(x + grad_eps) so the slope stays finite
// at x == 0.
Tensor sqrt_smoothed(const Tensor& a, double grad_eps = 1e-12);

// 2x2 max pooling, stride 2; requires even H and W. Ties resolve to the
// first position in row-major window order.
Tensor maxpool2(const Tensor& input);

// Same-resolution k x k sliding-window mean (k odd) with zero padding k/2
// and a constant divisor k^2, borders included.
Tensor avgpool_window(const Tensor& input, int k);

// Nearest-neighbor 2x upsampling in both spatial dimensions.
Tensor upsample2(const Tensor& input);

}  // namespace msnet
