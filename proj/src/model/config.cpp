#include "hafno/model/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "hafno/spectral/fft.hpp"
#include "hafno/util/io.hpp"

namespace hafno::model {

using layers::ResidualKind;

std::string to_string(AttentionKind k) {
    switch (k) {
        case AttentionKind::cbam: return "cbam";
        case AttentionKind::none: return "none";
        case AttentionKind::mlp: return "mlp";
    }
    return "?";
}

std::string to_string(ResidualKind k) {
    switch (k) {
        case ResidualKind::conv: return "conv";
        case ResidualKind::pointwise: return "pointwise";
        case ResidualKind::identity: return "identity";
    }
    return "?";
}

std::string to_string(AblationArm a) {
    switch (a) {
        case AblationArm::wo_attention: return "wo_attention";
        case AblationArm::wo_fno: return "wo_fno";
        case AblationArm::conv_to_res: return "conv_to_res";
        case AblationArm::conv_to_fc: return "conv_to_fc";
        case AblationArm::att_to_mlp: return "att_to_mlp";
        case AblationArm::add_hier: return "add_hier";
    }
    return "?";
}

AblationArm parse_ablation_arm(const std::string& s) {
    for (AblationArm a : {AblationArm::wo_attention, AblationArm::wo_fno, AblationArm::conv_to_res,
                          AblationArm::conv_to_fc, AblationArm::att_to_mlp, AblationArm::add_hier}) {
        if (to_string(a) == s) return a;
    }
    throw std::invalid_argument("unknown ablation arm '" + s +
                                "' (expected wo_attention, wo_fno, conv_to_res, conv_to_fc, att_to_mlp or add_hier)");
}

namespace {

AttentionKind parse_attention(const std::string& s) {
    for (AttentionKind k : {AttentionKind::cbam, AttentionKind::none, AttentionKind::mlp})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown attention kind '" + s + "'");
}

ResidualKind parse_residual(const std::string& s) {
    for (ResidualKind k : {ResidualKind::conv, ResidualKind::pointwise, ResidualKind::identity})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown residual kind '" + s + "'");
}

std::size_t parse_size(const std::string& s) {
    auto v = split_sizes(s);
    if (v.size() != 1) throw std::invalid_argument("expected one integer, got '" + s + "'");
    return v[0];
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
    if (scales.empty()) fail("at least one scale required");
    if (coefficient_channels == 0 || output_channels == 0) fail("channel counts must be positive");
    if (head_hidden == 0) fail("head_hidden must be positive");
    if (residual_kernel % 2 == 0) fail("residual kernel must be odd");
    if (attention == AttentionKind::cbam) {
        if (attention_reduction == 0) fail("attention reduction must be positive");
        if (spatial_kernel % 2 == 0) fail("spatial attention kernel must be odd");
    }
    for (std::size_t k = 0; k < scales.size(); ++k) {
        const auto& s = scales[k];
        const std::string tag = "scale " + std::to_string(k + 1) + ": ";
        if (s.channels == 0) fail(tag + "zero channels");
        if (s.layers == 0) fail(tag + "zero layers");
        if (fourier && s.modes == 0) fail(tag + "zero modes");
        if (attention == AttentionKind::cbam && s.channels % attention_reduction != 0) {
            fail(tag + std::to_string(s.channels) + " channels not divisible by attention reduction " +
                 std::to_string(attention_reduction));
        }
    }
    const auto& n = normalizer;
    if (n.input_mean.size() != n.input_std.size() || n.output_mean.size() != n.output_std.size())
        fail("normalizer mean/std lengths differ");
    if (!n.input_mean.empty() && n.input_mean.size() != coefficient_channels)
        fail("normalizer input channels != coefficient channels");
    if (!n.output_mean.empty() && n.output_mean.size() != output_channels)
        fail("normalizer output channels != output channels");
    for (double s : n.input_std)
        if (!(s > 0.0)) fail("normalizer input std must be positive");
    for (double s : n.output_std)
        if (!(s > 0.0)) fail("normalizer output std must be positive");
}

std::size_t ModelConfig::min_grid() const {
    std::size_t need = 1;
    for (std::size_t k = 0; k < scales.size(); ++k) {
        std::size_t side = 1;
        if (k + 1 < scales.size()) side = std::max<std::size_t>(side, 2);     // pooled again
        if (k > 0) side = std::max<std::size_t>(side, 3);                    // downsampling conv
        if (fourier) side = std::max(side, 2 * scales[k].modes);
        if (residual == ResidualKind::conv) side = std::max(side, residual_kernel);
        if (attention == AttentionKind::cbam) side = std::max(side, spatial_kernel);
        need = std::max(need, side << k);
    }
    return spectral::next_power_of_two(need);
}

std::size_t ModelConfig::padded_side(std::size_t n) const {
    return spectral::next_power_of_two(std::max(n, min_grid()));
}

void ModelConfig::check_grid(std::size_t H, std::size_t W) const {
    if (H < min_grid() || W < min_grid()) {
        throw std::invalid_argument("grid " + std::to_string(H) + "x" + std::to_string(W) + " below minimum side " +
                                    std::to_string(min_grid()) + " for this configuration");
    }
    const std::size_t f = std::size_t{1} << (scales.size() - 1);
    if (H % f != 0 || W % f != 0) {
        throw std::invalid_argument("grid " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by " +
                                    std::to_string(f));
    }
    if (fourier) {
        for (std::size_t k = 0; k < scales.size(); ++k)
            spectral::check_mode_cut(H >> k, W >> k, scales[k].modes, scales[k].modes);
    }
}

std::string ModelConfig::to_text() const {
    KeyValues kv;
    std::vector<std::size_t> ch, md, ly;
    for (const auto& s : scales) {
        ch.push_back(s.channels);
        md.push_back(s.modes);
        ly.push_back(s.layers);
    }
    kv["scales.channels"] = join_sizes(ch);
    kv["scales.modes"] = join_sizes(md);
    kv["scales.layers"] = join_sizes(ly);
    kv["coefficient_channels"] = std::to_string(coefficient_channels);
    kv["output_channels"] = std::to_string(output_channels);
    kv["coordinate_channels"] = coordinate_channels ? "1" : "0";
    kv["attention"] = to_string(attention);
    kv["attention_reduction"] = std::to_string(attention_reduction);
    kv["spatial_kernel"] = std::to_string(spatial_kernel);
    kv["fourier"] = fourier ? "1" : "0";
    kv["residual"] = to_string(residual);
    kv["residual_kernel"] = std::to_string(residual_kernel);
    kv["head_hidden"] = std::to_string(head_hidden);
    kv["normalizer.input_mean"] = join_doubles(normalizer.input_mean);
    kv["normalizer.input_std"] = join_doubles(normalizer.input_std);
    kv["normalizer.output_mean"] = join_doubles(normalizer.output_mean);
    kv["normalizer.output_std"] = join_doubles(normalizer.output_std);
    return to_canonical_text(kv);
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    const KeyValues kv = parse_canonical_text(text);
    static const std::vector<std::string> known = {
        "scales.channels",       "scales.modes",          "scales.layers",          "coefficient_channels",
        "output_channels",       "coordinate_channels",   "attention",              "attention_reduction",
        "spatial_kernel",        "fourier",               "residual",               "residual_kernel",
        "head_hidden",           "normalizer.input_mean", "normalizer.input_std",   "normalizer.output_mean",
        "normalizer.output_std"};
    for (const auto& [k, v] : kv) {
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw std::invalid_argument("model config: unknown key '" + k + "'");
    }
    ModelConfig c;
    const auto ch = split_sizes(require_key(kv, "scales.channels"));
    const auto md = split_sizes(require_key(kv, "scales.modes"));
    const auto ly = split_sizes(require_key(kv, "scales.layers"));
    if (ch.size() != md.size() || ch.size() != ly.size())
        throw std::invalid_argument("model config: scale lists have different lengths");
    c.scales.clear();
    for (std::size_t i = 0; i < ch.size(); ++i) c.scales.push_back({ch[i], md[i], ly[i]});
    c.coefficient_channels = parse_size(require_key(kv, "coefficient_channels"));
    c.output_channels = parse_size(require_key(kv, "output_channels"));
    c.coordinate_channels = parse_size(require_key(kv, "coordinate_channels")) != 0;
    c.attention = parse_attention(require_key(kv, "attention"));
    c.attention_reduction = parse_size(require_key(kv, "attention_reduction"));
    c.spatial_kernel = parse_size(require_key(kv, "spatial_kernel"));
    c.fourier = parse_size(require_key(kv, "fourier")) != 0;
    c.residual = parse_residual(require_key(kv, "residual"));
    c.residual_kernel = parse_size(require_key(kv, "residual_kernel"));
    c.head_hidden = parse_size(require_key(kv, "head_hidden"));
    auto opt = [&](const char* key) {
        auto it = kv.find(key);
        return it == kv.end() ? std::vector<double>{} : split_doubles(it->second);
    };
    c.normalizer.input_mean = opt("normalizer.input_mean");
    c.normalizer.input_std = opt("normalizer.input_std");
    c.normalizer.output_mean = opt("normalizer.output_mean");
    c.normalizer.output_std = opt("normalizer.output_std");
    c.validate();
    return c;
}

ModelConfig default_config() { return ModelConfig{}; }

ModelConfig tiny_config() {
    ModelConfig c;
    c.scales = {{8, 24, 1}, {16, 12, 1}, {16, 6, 1}, {16, 3, 1}};
    c.head_hidden = 32;
    return c;
}

ModelConfig plain_fno_config(std::size_t width, std::size_t modes, std::size_t layers, std::size_t head_hidden) {
    ModelConfig c;
    c.scales = {{width, modes, layers}};
    c.attention = AttentionKind::none;
    c.residual = ResidualKind::pointwise;
    c.head_hidden = head_hidden;
    return c;
}

ModelConfig plain_fno_matched(std::size_t target, std::size_t modes, std::size_t layers, std::size_t head_hidden) {
    ModelConfig best = plain_fno_config(1, modes, layers, head_hidden);
    std::size_t best_gap = static_cast<std::size_t>(-1);
    for (std::size_t w = 1; w <= 1024; ++w) {
        ModelConfig c = plain_fno_config(w, modes, layers, head_hidden);
        const std::size_t n = param_count(c);
        const std::size_t gap = n > target ? n - target : target - n;
        if (gap < best_gap) {
            best_gap = gap;
            best = c;
        }
        if (n > target) break;
    }
    return best;
}

ModelConfig matched_baseline(const ModelConfig& reference, std::size_t layers) {
    auto shaped = [&](std::size_t width) {
        ModelConfig c = plain_fno_config(width, reference.scales.front().modes, layers, reference.head_hidden);
        c.coefficient_channels = reference.coefficient_channels;
        c.output_channels = reference.output_channels;
        c.coordinate_channels = reference.coordinate_channels;
        return c;
    };
    const std::size_t target = param_count(reference);
    ModelConfig best = shaped(1);
    std::size_t best_gap = static_cast<std::size_t>(-1);
    for (std::size_t w = 1; w <= 1024; ++w) {
        ModelConfig c = shaped(w);
        const std::size_t n = param_count(c);
        const std::size_t gap = n > target ? n - target : target - n;
        if (gap < best_gap) {
            best_gap = gap;
            best = c;
        }
        if (n > target) break;
    }
    return best;
}

ModelConfig build_ablation(const ModelConfig& cfg, AblationArm arm) {
    ModelConfig c = cfg;
    switch (arm) {
        case AblationArm::wo_attention: c.attention = AttentionKind::none; break;
        case AblationArm::wo_fno: c.fourier = false; break;
        case AblationArm::conv_to_res: c.residual = ResidualKind::identity; break;
        case AblationArm::conv_to_fc: c.residual = ResidualKind::pointwise; break;
        case AblationArm::att_to_mlp: c.attention = AttentionKind::mlp; break;
        case AblationArm::add_hier: {
            ScaleSpec extra = c.scales.back();
            extra.modes = std::max<std::size_t>(1, extra.modes / 2);
            c.scales.push_back(extra);
            break;
        }
    }
    c.validate();
    return c;
}

std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<ParamSpec> out;
    auto linear = [&](const std::string& name, std::size_t c_out, std::size_t c_in) {
        const double s = 1.0 / std::sqrt(static_cast<double>(c_in));
        out.push_back({name + ".weight", {c_out, c_in}, s});
        out.push_back({name + ".bias", {c_out}, s});
    };
    auto conv = [&](const std::string& name, std::size_t c_out, std::size_t c_in, std::size_t k, bool bias) {
        const double s = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
        out.push_back({name + ".weight", {c_out, c_in, k, k}, s});
        if (bias) out.push_back({name + ".bias", {c_out}, s});
    };

    const std::size_t K = cfg.num_scales();
    linear("lift", cfg.scales[0].channels, cfg.input_channels());
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t C = cfg.scales[k].channels;
        const std::string tag = "scale" + std::to_string(k + 1);
        if (k > 0) conv("down" + std::to_string(k + 1), C, cfg.scales[k - 1].channels, 3, true);
        switch (cfg.attention) {
            case AttentionKind::cbam: {
                const std::size_t hidden = C / cfg.attention_reduction;
                linear(tag + ".attn.fc1", hidden, C);
                linear(tag + ".attn.fc2", C, hidden);
                conv(tag + ".attn.spatial", 1, 2, cfg.spatial_kernel, false);
                break;
            }
            case AttentionKind::mlp:
                linear(tag + ".mlp.fc1", C, C);
                linear(tag + ".mlp.fc2", C, C);
                break;
            case AttentionKind::none: break;
        }
        for (std::size_t l = 0; l < cfg.scales[k].layers; ++l) {
            const std::string lt = tag + ".layer" + std::to_string(l + 1);
            if (cfg.fourier) {
                const std::size_t m = cfg.scales[k].modes;
                const double s = 1.0 / (static_cast<double>(C * C) * std::sqrt(static_cast<double>(m * m)));
                out.push_back({lt + ".spectral.re", spectral::spectral_weight_shape(m, m, C, C), s});
                out.push_back({lt + ".spectral.im", spectral::spectral_weight_shape(m, m, C, C), s});
            }
            switch (cfg.residual) {
                case ResidualKind::conv: conv(lt + ".local", C, C, cfg.residual_kernel, true); break;
                case ResidualKind::pointwise: linear(lt + ".local", C, C); break;
                case ResidualKind::identity: break;
            }
        }
    }
    for (std::size_t k = K - 1; k-- > 0;) {
        linear("fuse" + std::to_string(k + 1), cfg.scales[k].channels,
               cfg.scales[k].channels + cfg.scales[k + 1].channels);
    }
    linear("head.fc1", cfg.head_hidden, cfg.scales[0].channels);
    linear("head.fc2", cfg.output_channels, cfg.head_hidden);
    return out;
}

std::size_t param_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& p : parameter_layout(cfg)) n += shape_size(p.shape);
    return n;
}

}  // namespace hafno::model
