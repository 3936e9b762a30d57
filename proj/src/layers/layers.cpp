#include "hafno/layers/layers.hpp"

#include <stdexcept>

namespace hafno::layers {

using namespace hafno::ops;

Var conv_res_fourier(const Var& v, const ConvResFourierParams& p) {
    Var local;
    switch (p.residual) {
        case ResidualKind::conv: local = conv2d_circular(v, p.weight, p.bias); break;
        case ResidualKind::pointwise: local = pointwise_linear(v, p.weight, p.bias); break;
        case ResidualKind::identity: local = v; break;
    }
    if (!p.R) return gelu(local);
    Var spectral_branch = spectral::fourier_unit(v, *p.R);
    if (spectral_branch->shape() != local->shape()) {
        throw std::invalid_argument("conv_res_fourier: branch shapes differ " + shape_str(local->shape()) + " vs " +
                                    shape_str(spectral_branch->shape()));
    }
    return gelu(add(local, spectral_branch));
}

namespace {

Var shared_mlp(const Var& z, const AttentionParams& p) {
    return pointwise_linear(gelu(pointwise_linear(z, p.fc1_weight, p.fc1_bias)), p.fc2_weight, p.fc2_bias);
}

}  // namespace

Var channel_attention(const Var& a, const AttentionParams& p) {
    if (a->value.rank() != 3 || p.fc1_weight->value.dim(1) != a->value.dim(0)) {
        throw std::invalid_argument("channel_attention: input " + shape_str(a->shape()) + " vs MLP " +
                                    shape_str(p.fc1_weight->shape()));
    }
    return sigmoid(add(shared_mlp(global_avg_pool(a), p), shared_mlp(global_max_pool(a), p)));
}

Var spatial_attention(const Var& a, const AttentionParams& p) {
    const std::size_t k = p.spatial_kernel->value.dim(3);
    if (a->value.rank() != 3 || a->value.dim(1) < k || a->value.dim(2) < k) {
        throw std::invalid_argument("spatial_attention: grid " + shape_str(a->shape()) + " smaller than " +
                                    std::to_string(k) + "x" + std::to_string(k) + " kernel");
    }
    return sigmoid(conv2d_circular(concat_channels(channel_mean(a), channel_max(a)), p.spatial_kernel, nullptr));
}

Var attention_block(const Var& a, const AttentionParams& p, const AttentionOverrides& overrides) {
    const std::size_t C = a->value.dim(0), H = a->value.dim(1), W = a->value.dim(2);
    Var alpha_c = overrides.channel_value ? constant(Tensor(Shape{C, 1, 1}, *overrides.channel_value))
                                          : channel_attention(a, p);
    Var a_c = mul_broadcast(a, alpha_c);
    Var alpha_x = overrides.spatial_value ? constant(Tensor(Shape{1, H, W}, *overrides.spatial_value))
                                          : spatial_attention(a_c, p);
    return add(mul_broadcast(a_c, alpha_x), a);
}

Tensor attentive_correlation_direct(const Tensor& f, const Tensor& psi, const Tensor& alpha_channel,
                                    const Tensor& alpha_spatial) {
    const long C = static_cast<long>(f.dim(0)), H = static_cast<long>(f.dim(1)), W = static_cast<long>(f.dim(2));
    const long Co = static_cast<long>(psi.dim(0)), k = static_cast<long>(psi.dim(2)), half = k / 2;
    if (psi.dim(1) != f.dim(0)) throw std::invalid_argument("attentive_correlation_direct: channel mismatch");
    auto wrap = [](long d, long n) {
        d = ((d % n) + n) % n;
        return d >= (n + 1) / 2 ? d - n : d;  // representative in [-n/2, n/2)
    };
    auto kernel_at = [&](long o, long c, long dh, long dw) {
        if (dh < -half || dh > half || dw < -half || dw > half) return 0.0;
        return psi[((static_cast<std::size_t>(o) * psi.dim(1) + static_cast<std::size_t>(c)) * psi.dim(2) +
                    static_cast<std::size_t>(dh + half)) *
                       psi.dim(3) +
                   static_cast<std::size_t>(dw + half)];
    };
    Tensor out(Shape{static_cast<std::size_t>(Co), f.dim(1), f.dim(2)});
    for (long o = 0; o < Co; ++o)
        for (long xh = 0; xh < H; ++xh)
            for (long xw = 0; xw < W; ++xw) {
                double acc = 0.0;
                for (long c = 0; c < C; ++c)
                    for (long yh = 0; yh < H; ++yh)
                        for (long yw = 0; yw < W; ++yw) {
                            const double w = kernel_at(o, c, wrap(yh - xh, H), wrap(yw - xw, W));
                            if (w == 0.0) continue;
                            const double alpha =
                                alpha_spatial[static_cast<std::size_t>(yh * W + yw)] * alpha_channel[static_cast<std::size_t>(c)];
                            acc += alpha * f.at(static_cast<std::size_t>(c), static_cast<std::size_t>(yh),
                                                static_cast<std::size_t>(yw)) *
                                   w;
                        }
                out.at(static_cast<std::size_t>(o), static_cast<std::size_t>(xh), static_cast<std::size_t>(xw)) = acc;
            }
    return out;
}

double attentive_conv_factorization_check(const Tensor& f, const Tensor& psi, const AttentionParams& p) {
    Var fv = constant(f);
    Var alpha_c = channel_attention(fv, p);
    Var alpha_x = spatial_attention(mul_broadcast(fv, alpha_c), p);
    const Tensor lhs = attentive_correlation_direct(f, psi, alpha_c->value, alpha_x->value);
    Var weighted = mul_broadcast(mul_broadcast(fv, alpha_c), alpha_x);
    const Tensor rhs = conv2d_circular(weighted, constant(psi), nullptr)->value;
    return max_abs_diff(lhs, rhs);
}

}  // namespace hafno::layers
