#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hafno/core/tensor.hpp"
#include "hafno/layers/layers.hpp"

namespace hafno::model {

struct ScaleSpec {
    std::size_t channels = 32;
    std::size_t modes = 24;
    std::size_t layers = 1;  // conv-residual Fourier layers at this scale
};

enum class AttentionKind {
    cbam,  // channel + spatial attention
    none,
    mlp,   // v = a + MLP(a), pointwise
};

enum class AblationArm { wo_attention, wo_fno, conv_to_res, conv_to_fc, att_to_mlp, add_hier };

std::string to_string(AttentionKind k);
std::string to_string(layers::ResidualKind k);
std::string to_string(AblationArm a);
AblationArm parse_ablation_arm(const std::string& s);

/// Per-channel affine normalisation applied around the network.
struct Normalizer {
    std::vector<double> input_mean, input_std;    // one per coefficient channel
    std::vector<double> output_mean, output_std;  // one per output channel

    bool empty() const { return input_mean.empty() && output_mean.empty(); }
};

struct ModelConfig {
    std::vector<ScaleSpec> scales{{32, 24, 1}, {64, 12, 1}, {128, 6, 1}, {128, 3, 1}};
    std::size_t coefficient_channels = 1;
    std::size_t output_channels = 1;
    bool coordinate_channels = true;
    AttentionKind attention = AttentionKind::cbam;
    std::size_t attention_reduction = 4;
    std::size_t spatial_kernel = 7;
    bool fourier = true;
    layers::ResidualKind residual = layers::ResidualKind::conv;
    std::size_t residual_kernel = 3;
    std::size_t head_hidden = 128;
    Normalizer normalizer;

    std::size_t num_scales() const { return scales.size(); }
    std::size_t input_channels() const { return coefficient_channels + (coordinate_channels ? 2 : 0); }

    /// Throws std::invalid_argument naming the first inconsistency.
    void validate() const;

    /// Smallest power-of-two side on which every scale is well formed.
    std::size_t min_grid() const;
    /// Padded side for an input side n: next power of two >= max(n, min_grid()).
    std::size_t padded_side(std::size_t n) const;
    /// Throws unless an H x W grid (already padded) works at every scale.
    void check_grid(std::size_t H, std::size_t W) const;

    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

inline bool operator==(const ScaleSpec& a, const ScaleSpec& b) {
    return a.channels == b.channels && a.modes == b.modes && a.layers == b.layers;
}
inline bool operator==(const Normalizer& a, const Normalizer& b) {
    return a.input_mean == b.input_mean && a.input_std == b.input_std && a.output_mean == b.output_mean &&
           a.output_std == b.output_std;
}

/// Channels {32,64,128,128}, modes {24,12,6,3}, r_att = 4.
ModelConfig default_config();
/// Narrow variant sized for single-core runs.
ModelConfig tiny_config();
/// Single-scale plain FNO: pointwise skip, no attention, `layers` stacked Fourier layers.
ModelConfig plain_fno_config(std::size_t width, std::size_t modes = 24, std::size_t layers = 4,
                             std::size_t head_hidden = 128);
/// Plain FNO whose width puts its parameter count closest to `target`.
ModelConfig plain_fno_matched(std::size_t target, std::size_t modes = 24, std::size_t layers = 4,
                              std::size_t head_hidden = 128);

/// Plain FNO with the reference's I/O channels, coordinate flag, finest-scale modes and
/// head width, sized to the reference's parameter count.
ModelConfig matched_baseline(const ModelConfig& reference, std::size_t layers = 4);

ModelConfig build_ablation(const ModelConfig& cfg, AblationArm arm);

struct ParamSpec {
    std::string name;
    Shape shape;
    double init_scale = 0.0;  // uniform(-s, s)
};

/// Every learnable tensor in declaration order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg);
std::size_t param_count(const ModelConfig& cfg);

}  // namespace hafno::model
