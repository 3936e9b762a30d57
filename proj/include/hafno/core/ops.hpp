#pragma once

#include "hafno/core/autodiff.hpp"

namespace hafno::ops {

enum class Elementwise { add, sub, mul, scale, gelu, sigmoid };

/// Binary kinds take `b` (same shape as `a`); `scale` and the scalar overloads
/// take a number; unary kinds ignore `b`.
Var elementwise(Elementwise kind, const Var& a, const Var& b);
Var elementwise(Elementwise kind, const Var& a, double b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add(const Var& a, double b);
Var scale(const Var& a, double s);
Var gelu(const Var& a);
Var sigmoid(const Var& a);

/// Product of x [C,H,W] with a map broadcast along its unit extents:
/// [C,1,1] (per channel), [1,H,W] (per position) or [C,H,W].
Var mul_broadcast(const Var& x, const Var& map);

Var sum(const Var& a);
/// Linear functional sum(a * weights) with constant weights.
Var dot(const Var& a, const Tensor& weights);

/// out[c] = sum_k weight[c,k] x[k] + bias[c] at every grid point. `bias` may be null.
Var pointwise_linear(const Var& x, const Var& weight, const Var& bias);

/// Same-size cross-correlation with periodic wraparound. Kernel [C_out,C_in,k,k], k odd.
Var conv2d_circular(const Var& x, const Var& kernel, const Var& bias);

/// 2x2 max pooling; gradient goes to the first row-major maximum of each block.
Var maxpool2(const Var& x);

/// Factor-2 bilinear upsampling, half-pixel centres, periodic neighbours.
Var bilinear_upsample2(const Var& x);

Var concat_channels(const Var& a, const Var& b);

Var global_avg_pool(const Var& x);  // [C,H,W] -> [C,1,1]
Var global_max_pool(const Var& x);  // [C,H,W] -> [C,1,1]
Var channel_mean(const Var& x);     // [C,H,W] -> [1,H,W]
Var channel_max(const Var& x);      // [C,H,W] -> [1,H,W]

/// Zero-pads right/bottom to [C,H,W]; crop_spatial keeps the top-left [C,H,W].
Var pad_spatial(const Var& x, std::size_t H, std::size_t W);
Var crop_spatial(const Var& x, std::size_t H, std::size_t W);

/// ||pred - truth||_2 / ||truth||_2 for a constant truth.
Var relative_l2(const Var& pred, const Tensor& truth);

}  // namespace hafno::ops
