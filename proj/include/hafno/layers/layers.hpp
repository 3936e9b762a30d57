#pragma once

#include <optional>

#include "hafno/core/ops.hpp"
#include "hafno/spectral/spectral.hpp"

namespace hafno::layers {

/// Local branch of the convolutional-residual Fourier layer.
enum class ResidualKind {
    conv,       // 3x3 circular convolution
    pointwise,  // per-point linear map (plain FNO skip)
    identity,   // plain residual v
};

struct ConvResFourierParams {
    std::optional<spectral::SpectralKernel> R;  // empty: no spectral branch
    ResidualKind residual = ResidualKind::conv;
    Var weight;  // [C_out,C_in,3,3] for conv, [C_out,C_in] for pointwise
    Var bias;    // [C_out]
};

/// GELU(local(v) + F^-1(R . F(v))).
Var conv_res_fourier(const Var& v, const ConvResFourierParams& p);

/// CBAM-style channel and spatial attention parameters.
struct AttentionParams {
    Var fc1_weight;      // [C/r, C]
    Var fc1_bias;        // [C/r]
    Var fc2_weight;      // [C, C/r]
    Var fc2_bias;        // [C]
    Var spatial_kernel;  // [1, 2, 7, 7]
};

/// Forces the attention maps to constants. Test hook.
struct AttentionOverrides {
    std::optional<double> channel_value;
    std::optional<double> spatial_value;
};

/// alpha^C = sigmoid(MLP(avgpool a) + MLP(maxpool a)), shape [C,1,1].
Var channel_attention(const Var& a, const AttentionParams& p);
/// alpha^X = sigmoid(conv7x7([mean_c a, max_c a])), shape [1,H,W].
Var spatial_attention(const Var& a, const AttentionParams& p);

/// v = alpha^X(a_c) * a_c + a with a_c = alpha^C(a) * a.
Var attention_block(const Var& a, const AttentionParams& p, const AttentionOverrides& overrides = {});

/// Attentive correlation evaluated position by position:
/// out[o,x] = sum_c sum_y alpha_c(y) f_c(y) psi_{o,c}(y - x), with
/// alpha_c(y) = alpha_x[y] * alpha_c_map[c], displacements wrapped on the torus.
Tensor attentive_correlation_direct(const Tensor& f, const Tensor& psi, const Tensor& alpha_channel,
                                    const Tensor& alpha_spatial);

/// Max |direct attentive correlation - conv2d_circular(alpha^X alpha^C f, psi)|
/// with both attention maps computed from f by the given parameters.
double attentive_conv_factorization_check(const Tensor& f, const Tensor& psi, const AttentionParams& p);

}  // namespace hafno::layers
