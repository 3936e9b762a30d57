#include "hafno/diagnostics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hafno/core/ops.hpp"
#include "hafno/layers/layers.hpp"
#include "hafno/model/model.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::diagnostics {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (double& v : t.storage()) v = rng.uniform(lo, hi);
    return t;
}

Var rleaf(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return leaf(random_tensor(shape, rng, lo, hi));
}

}  // namespace

GradcheckResult gradcheck(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Var> leaves,
                          std::uint64_t seed, std::size_t points, double h) {
    Rng rng(seed, "gradcheck");
    const Tensor probe = random_tensor(f(leaves)->shape(), rng);
    auto loss_of = [&]() {
        NoGradGuard guard;
        return ops::dot(f(leaves), probe)->value.item();
    };
    zero_grad(leaves);
    backward(ops::dot(f(leaves), probe));

    GradcheckResult r;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto& leafv = leaves[l];
        const std::size_t n = leafv->value.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng.engine());
        idx.resize(std::min(points, n));
        double num_max = 0.0, diff_max = 0.0;
        std::size_t worst = 0;
        double worst_a = 0.0, worst_n = 0.0;
        for (std::size_t i : idx) {
            double& x = leafv->value[i];
            const double x0 = x;
            x = x0 + h;
            const double fp = loss_of();
            x = x0 - h;
            const double fm = loss_of();
            x = x0;
            const double numeric = (fp - fm) / (2 * h);
            const double analytic = leafv->grad.empty() ? 0.0 : leafv->grad[i];
            num_max = std::max(num_max, std::abs(numeric));
            if (std::abs(numeric - analytic) >= diff_max) {
                diff_max = std::abs(numeric - analytic);
                worst = i;
                worst_a = analytic;
                worst_n = numeric;
            }
            ++r.checked;
        }
        const double rel = diff_max / std::max(num_max, 1e-8);
        if (rel >= r.max_rel_error) {
            r.max_rel_error = rel;
            r.worst_leaf = l;
            r.worst_index = worst;
            r.worst_analytic = worst_a;
            r.worst_numeric = worst_n;
        }
    }
    return r;
}

std::vector<GradcheckEntry> gradcheck_suite() {
    using namespace ops;
    std::vector<GradcheckEntry> out;
    Rng rng(2024, "gradcheck_suite");
    constexpr double kLinearTol = 1e-10, kGeluTol = 1e-6, kTol = 1e-4;

    using Fn = std::function<Var(const std::vector<Var>&)>;
    auto linear = [&](const std::string& name, Fn f, std::vector<Var> leaves) {
        out.push_back({name, true, kLinearTol, gradcheck(f, std::move(leaves), 11, 12, 1.0)});
    };
    auto smooth = [&](const std::string& name, double tol, Fn f, std::vector<Var> leaves, std::size_t points = 12) {
        out.push_back({name, false, tol, gradcheck(f, std::move(leaves), 11, points, 1e-5)});
    };

    const Shape field{3, 8, 8};
    linear("add", [](auto& p) { return add(p[0], p[1]); }, {rleaf(field, rng), rleaf(field, rng)});
    linear("sub", [](auto& p) { return sub(p[0], p[1]); }, {rleaf(field, rng), rleaf(field, rng)});
    linear("mul", [](auto& p) { return mul(p[0], p[1]); }, {rleaf(field, rng), rleaf(field, rng)});
    linear("add_scalar", [](auto& p) { return add(p[0], 0.7); }, {rleaf(field, rng)});
    linear("scale", [](auto& p) { return scale(p[0], -1.3); }, {rleaf(field, rng)});
    linear("mul_broadcast_channel", [](auto& p) { return mul_broadcast(p[0], p[1]); },
           {rleaf(field, rng), rleaf({3, 1, 1}, rng)});
    linear("mul_broadcast_spatial", [](auto& p) { return mul_broadcast(p[0], p[1]); },
           {rleaf(field, rng), rleaf({1, 8, 8}, rng)});
    linear("sum", [](auto& p) { return sum(p[0]); }, {rleaf(field, rng)});
    {
        const Tensor w = random_tensor(field, rng);
        linear("dot", [w](auto& p) { return dot(p[0], w); }, {rleaf(field, rng)});
    }
    linear("pointwise_linear", [](auto& p) { return pointwise_linear(p[0], p[1], p[2]); },
           {rleaf(field, rng), rleaf({4, 3}, rng), rleaf({4}, rng)});
    linear("conv2d_circular", [](auto& p) { return conv2d_circular(p[0], p[1], p[2]); },
           {rleaf(field, rng), rleaf({2, 3, 3, 3}, rng), rleaf({2}, rng)});
    linear("bilinear_upsample2", [](auto& p) { return bilinear_upsample2(p[0]); }, {rleaf(field, rng)});
    linear("concat_channels", [](auto& p) { return concat_channels(p[0], p[1]); },
           {rleaf(field, rng), rleaf({2, 8, 8}, rng)});
    linear("global_avg_pool", [](auto& p) { return global_avg_pool(p[0]); }, {rleaf(field, rng)});
    linear("channel_mean", [](auto& p) { return channel_mean(p[0]); }, {rleaf(field, rng)});
    linear("pad_spatial", [](auto& p) { return pad_spatial(p[0], 12, 16); }, {rleaf(field, rng)});
    linear("crop_spatial", [](auto& p) { return crop_spatial(p[0], 5, 7); }, {rleaf(field, rng)});

    linear("rfft2", [](auto& p) { return spectral::rfft2_node(p[0]); }, {rleaf(field, rng)});
    {
        const Tensor s = spectral::rfft2(random_tensor(field, rng));
        linear("irfft2", [](auto& p) { return spectral::irfft2_node(p[0], 8, 8); }, {leaf(s)});
        linear("truncate_modes", [](auto& p) { return spectral::truncate_node(p[0], 3, 3); }, {leaf(s)});
        const Tensor t = spectral::rfft2(random_tensor(field, rng));
        linear("pad_modes",
               [](auto& p) { return spectral::pad_node(spectral::truncate_node(p[0], 2, 3), 8, 8); }, {leaf(t)});
    }
    {
        auto R = spectral::make_spectral_kernel(3, 3, 3, 2, rng);
        const Tensor s = spectral::truncate_modes(spectral::forward(random_tensor(field, rng)), 3, 3).coeffs;
        linear("spectral_multiply",
               [R](auto& p) {
                   spectral::SpectralKernel K = R;
                   K.re = p[1];
                   K.im = p[2];
                   return spectral::spectral_multiply_node(p[0], K);
               },
               {leaf(s), R.re, R.im});
        auto R2 = spectral::make_spectral_kernel(3, 3, 3, 3, rng);
        linear("fourier_unit",
               [R2](auto& p) {
                   spectral::SpectralKernel K = R2;
                   K.re = p[1];
                   K.im = p[2];
                   return spectral::fourier_unit(p[0], K);
               },
               {rleaf(field, rng), R2.re, R2.im});
    }

    smooth("gelu", kGeluTol, [](auto& p) { return gelu(p[0]); }, {rleaf(field, rng, -3.0, 3.0)});
    smooth("sigmoid", kTol, [](auto& p) { return sigmoid(p[0]); }, {rleaf(field, rng, -3.0, 3.0)});
    smooth("maxpool2", kTol, [](auto& p) { return maxpool2(p[0]); }, {rleaf(field, rng)});
    smooth("global_max_pool", kTol, [](auto& p) { return global_max_pool(p[0]); }, {rleaf(field, rng)});
    smooth("channel_max", kTol, [](auto& p) { return channel_max(p[0]); }, {rleaf(field, rng)});
    {
        const Tensor truth = random_tensor(field, rng);
        smooth("relative_l2", kTol, [truth](auto& p) { return relative_l2(p[0], truth); }, {rleaf(field, rng)});
    }

    const std::size_t C = 4;
    const Shape feat{C, 16, 16};
    {
        layers::ConvResFourierParams crf;
        crf.R = spectral::make_spectral_kernel(4, 4, C, C, rng);
        crf.weight = rleaf({C, C, 3, 3}, rng, -0.3, 0.3);
        crf.bias = rleaf({C}, rng, -0.1, 0.1);
        smooth("conv_res_fourier", kGeluTol,
               [crf](auto& p) { return layers::conv_res_fourier(p[0], crf); },
               {rleaf(feat, rng), crf.R->re, crf.R->im, crf.weight, crf.bias});
    }
    {
        layers::AttentionParams att{rleaf({C / 2, C}, rng), rleaf({C / 2}, rng), rleaf({C, C / 2}, rng),
                                    rleaf({C}, rng), rleaf({1, 2, 7, 7}, rng, -0.3, 0.3)};
        const std::vector<Var> leaves{att.fc1_weight, att.fc1_bias, att.fc2_weight, att.fc2_bias, att.spatial_kernel};
        auto with_input = [&](Var x) {
            std::vector<Var> v{std::move(x)};
            v.insert(v.end(), leaves.begin(), leaves.end());
            return v;
        };
        smooth("channel_attention", kTol, [att](auto& p) { return layers::channel_attention(p[0], att); },
               with_input(rleaf(feat, rng)));
        smooth("spatial_attention", kTol, [att](auto& p) { return layers::spatial_attention(p[0], att); },
               with_input(rleaf(feat, rng)));
        smooth("attention_block", kTol, [att](auto& p) { return layers::attention_block(p[0], att); },
               with_input(rleaf(feat, rng)));
    }
    {
        model::ModelConfig cfg;
        cfg.scales = {{4, 4, 1}, {8, 2, 1}};
        cfg.head_hidden = 8;
        cfg.spatial_kernel = 3;
        auto m = std::make_shared<model::HierarchicalModel>(cfg, 3);
        const Tensor a = random_tensor({1, 16, 16}, rng, 0.5, 1.5);
        const Tensor u = random_tensor({1, 16, 16}, rng);
        smooth("full_model_loss", kTol, [m, a, u](auto&) { return relative_l2(m->forward(a), u); }, m->parameters(), 3);
    }
    return out;
}

std::string describe_failures(const std::vector<GradcheckEntry>& entries) {
    std::ostringstream os;
    for (const auto& e : entries) {
        if (e.passed()) continue;
        os << e.op << ": rel error " << e.result.max_rel_error << " >= " << e.tolerance << " at leaf "
           << e.result.worst_leaf << " index " << e.result.worst_index << " (analytic " << e.result.worst_analytic
           << ", numeric " << e.result.worst_numeric << ")\n";
    }
    return os.str();
}

}  // namespace hafno::diagnostics
