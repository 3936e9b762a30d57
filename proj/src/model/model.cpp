#include "hafno/model/model.hpp"

#include <stdexcept>

#include "hafno/util/rng.hpp"

namespace hafno::model {

using namespace hafno::ops;

HierarchicalModel::HierarchicalModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    Rng rng(seed, "init");
    for (const auto& spec : parameter_layout(cfg_)) {
        Tensor t(spec.shape);
        for (double& v : t.storage()) v = rng.uniform(-spec.init_scale, spec.init_scale);
        params_.push_back(leaf(std::move(t), true, spec.name));
        names_.push_back(spec.name);
    }
    bind();
}

HierarchicalModel::HierarchicalModel(ModelConfig cfg, const NamedTensors& values) : cfg_(std::move(cfg)) {
    const auto layout = parameter_layout(cfg_);
    if (layout.size() != values.size()) {
        throw std::invalid_argument("model restore: expected " + std::to_string(layout.size()) + " tensors, got " +
                                    std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& [name, t] = values[i];
        if (name != layout[i].name || t.shape() != layout[i].shape) {
            throw std::invalid_argument("model restore: tensor " + std::to_string(i) + " is '" + name + "' " +
                                        shape_str(t.shape()) + ", expected '" + layout[i].name + "' " +
                                        shape_str(layout[i].shape));
        }
        params_.push_back(leaf(t, true, name));
        names_.push_back(name);
    }
    bind();
}

void HierarchicalModel::bind() {
    index_.clear();
    for (std::size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = i;
    attention_.clear();
    crf_.clear();
    for (std::size_t k = 0; k < cfg_.num_scales(); ++k) {
        const std::string tag = "scale" + std::to_string(k + 1);
        const std::size_t C = cfg_.scales[k].channels, m = cfg_.scales[k].modes;
        layers::AttentionParams a;
        if (cfg_.attention == AttentionKind::cbam) {
            a = {p(tag + ".attn.fc1.weight"), p(tag + ".attn.fc1.bias"), p(tag + ".attn.fc2.weight"),
                 p(tag + ".attn.fc2.bias"), p(tag + ".attn.spatial.weight")};
        } else if (cfg_.attention == AttentionKind::mlp) {
            a = {p(tag + ".mlp.fc1.weight"), p(tag + ".mlp.fc1.bias"), p(tag + ".mlp.fc2.weight"),
                 p(tag + ".mlp.fc2.bias"), nullptr};
        }
        attention_.push_back(a);
        std::vector<layers::ConvResFourierParams> stack;
        for (std::size_t l = 0; l < cfg_.scales[k].layers; ++l) {
            const std::string lt = tag + ".layer" + std::to_string(l + 1);
            layers::ConvResFourierParams c;
            if (cfg_.fourier) c.R = spectral::SpectralKernel{p(lt + ".spectral.re"), p(lt + ".spectral.im"), m, m, C, C};
            c.residual = cfg_.residual;
            c.weight = maybe(lt + ".local.weight");
            c.bias = maybe(lt + ".local.bias");
            stack.push_back(std::move(c));
        }
        crf_.push_back(std::move(stack));
    }
}

Var HierarchicalModel::p(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::logic_error("model has no parameter '" + name + "'");
    return params_[it->second];
}

Var HierarchicalModel::maybe(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second];
}

const Var& HierarchicalModel::parameter(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("model has no parameter '" + name + "'");
    return params_[it->second];
}

void HierarchicalModel::set_normalizer(Normalizer n) {
    ModelConfig c = cfg_;
    c.normalizer = std::move(n);
    c.validate();
    cfg_ = std::move(c);
}

std::size_t HierarchicalModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& v : params_) n += v->value.size();
    return n;
}

NamedTensors HierarchicalModel::state() const {
    NamedTensors out;
    for (std::size_t i = 0; i < params_.size(); ++i) out.emplace_back(names_[i], params_[i]->value);
    return out;
}

HierarchicalModel HierarchicalModel::clone() const {
    HierarchicalModel m(cfg_, state());
    m.attention_overrides = attention_overrides;
    return m;
}

Tensor HierarchicalModel::prepare_input(const Tensor& a) const {
    if (a.rank() != 3 || a.dim(0) != cfg_.coefficient_channels) {
        throw std::invalid_argument("model input " + shape_str(a.shape()) + " does not have " +
                                    std::to_string(cfg_.coefficient_channels) + " coefficient channels");
    }
    if (!a.all_finite()) throw std::domain_error("model input contains non-finite values");
    const std::size_t Ca = a.dim(0), H = a.dim(1), W = a.dim(2);
    const std::size_t P = cfg_.padded_side(H), Q = cfg_.padded_side(W);
    Tensor x(Shape{cfg_.input_channels(), P, Q});
    const auto& n = cfg_.normalizer;
    for (std::size_t c = 0; c < Ca; ++c) {
        const double mu = n.input_mean.empty() ? 0.0 : n.input_mean[c];
        const double sd = n.input_std.empty() ? 1.0 : n.input_std[c];
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) x.at(c, i, j) = (a.at(c, i, j) - mu) / sd;
    }
    if (cfg_.coordinate_channels) {
        const double sh = H > 1 ? 1.0 / static_cast<double>(H - 1) : 0.0;
        const double sw = W > 1 ? 1.0 / static_cast<double>(W - 1) : 0.0;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j) {
                x.at(Ca, i, j) = static_cast<double>(i) * sh;
                x.at(Ca + 1, i, j) = static_cast<double>(j) * sw;
            }
    }
    return x;
}

Var HierarchicalModel::lift(const Var& x) const {
    if (x->value.rank() != 3 || x->value.dim(0) != cfg_.input_channels()) {
        throw std::invalid_argument("lift: input " + shape_str(x->shape()) + ", expected " +
                                    std::to_string(cfg_.input_channels()) + " channels");
    }
    return pointwise_linear(x, p("lift.weight"), p("lift.bias"));
}

Var HierarchicalModel::downsample(std::size_t level, const Var& x) const {
    if (level < 2 || level > cfg_.num_scales()) throw std::out_of_range("downsample: bad level");
    if (x->value.dim(1) % 2 != 0 || x->value.dim(2) % 2 != 0) {
        throw std::invalid_argument("downsample: odd grid " + shape_str(x->shape()));
    }
    const std::string tag = "down" + std::to_string(level);
    return conv2d_circular(maxpool2(x), p(tag + ".weight"), p(tag + ".bias"));
}

Var HierarchicalModel::process_scale(std::size_t level, const Var& a) const {
    if (level < 1 || level > cfg_.num_scales()) throw std::out_of_range("process_scale: bad level");
    const auto& ap = attention_[level - 1];
    Var v = a;
    switch (cfg_.attention) {
        case AttentionKind::cbam: v = layers::attention_block(a, ap, attention_overrides); break;
        case AttentionKind::mlp:
            v = add(a, pointwise_linear(gelu(pointwise_linear(a, ap.fc1_weight, ap.fc1_bias)), ap.fc2_weight,
                                        ap.fc2_bias));
            break;
        case AttentionKind::none: break;
    }
    for (const auto& layer : crf_[level - 1]) v = layers::conv_res_fourier(v, layer);
    return v;
}

Var HierarchicalModel::upsample_fuse(std::size_t level, const Var& coarse, const Var& fine) const {
    if (level < 1 || level >= cfg_.num_scales()) throw std::out_of_range("upsample_fuse: bad level");
    if (coarse->value.dim(1) * 2 != fine->value.dim(1) || coarse->value.dim(2) * 2 != fine->value.dim(2)) {
        throw std::invalid_argument("upsample_fuse: coarse " + shape_str(coarse->shape()) + " is not half of fine " +
                                    shape_str(fine->shape()));
    }
    const std::string tag = "fuse" + std::to_string(level);
    return pointwise_linear(concat_channels(bilinear_upsample2(coarse), fine), p(tag + ".weight"), p(tag + ".bias"));
}

Var HierarchicalModel::head(const Var& u) const {
    return pointwise_linear(gelu(pointwise_linear(u, p("head.fc1.weight"), p("head.fc1.bias"))), p("head.fc2.weight"),
                            p("head.fc2.bias"));
}

Var HierarchicalModel::network(const Var& x) const {
    cfg_.check_grid(x->value.dim(1), x->value.dim(2));
    const std::size_t K = cfg_.num_scales();
    std::vector<Var> processed(K);
    Var features = lift(x);
    for (std::size_t k = 1; k <= K; ++k) {
        if (k > 1) features = downsample(k, features);
        processed[k - 1] = process_scale(k, features);
    }
    Var u = processed[K - 1];
    for (std::size_t k = K - 1; k >= 1; --k) u = upsample_fuse(k, u, processed[k - 1]);
    return head(u);
}

Var HierarchicalModel::forward(const Tensor& a) const {
    const std::size_t H = a.dim(1), W = a.dim(2);
    Var out = crop_spatial(network(constant(prepare_input(a))), H, W);
    const auto& n = cfg_.normalizer;
    if (n.output_mean.empty()) return out;
    Tensor sd(Shape{cfg_.output_channels, 1, 1}), mu(Shape{cfg_.output_channels, H, W});
    for (std::size_t c = 0; c < cfg_.output_channels; ++c) {
        sd[c] = n.output_std[c];
        for (std::size_t i = 0; i < H * W; ++i) mu[c * H * W + i] = n.output_mean[c];
    }
    return add(mul_broadcast(out, constant(std::move(sd))), constant(std::move(mu)));
}

Tensor HierarchicalModel::predict(const Tensor& a) const {
    NoGradGuard guard;
    return forward(a)->value;
}

}  // namespace hafno::model
