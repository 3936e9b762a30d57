#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hafno/layers/layers.hpp"
#include "hafno/model/config.hpp"

namespace hafno::model {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// The K-scale hierarchical network.
///
/// Encoder: lift, then per scale attention + conv-residual Fourier layers, with
/// Conv3x3(MaxPool(.)) carrying the lifted features down between scales.
/// Decoder: u^K, then u^k = Conv1x1(concat(upsample(u^{k+1}), u^k)); a two-layer
/// GELU head maps u^1 to the output channels.
///
/// Parameters are immutable during a forward pass, so concurrent forwards on
/// distinct inputs are safe. Training mutates values between batches only.
class HierarchicalModel {
public:
    HierarchicalModel(ModelConfig cfg, std::uint64_t seed);
    /// Restores from tensors in declaration order; names and shapes must match the layout.
    HierarchicalModel(ModelConfig cfg, const NamedTensors& values);

    const ModelConfig& config() const { return cfg_; }
    void set_normalizer(Normalizer n);

    const std::vector<Var>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    std::size_t parameter_count() const;
    const Var& parameter(const std::string& name) const;
    NamedTensors state() const;
    /// Deep copy with independent parameter storage.
    HierarchicalModel clone() const;

    /// Normalised coefficients plus coordinate channels, zero-padded to the working grid.
    Tensor prepare_input(const Tensor& a) const;
    /// Core network on a prepared [d_a, P, Q] input; output [d_u, P, Q] in normalised units.
    Var network(const Var& x) const;
    /// Full map [C_a,H,W] -> [d_u,H,W] in physical units.
    Var forward(const Tensor& a) const;
    /// forward() without recording a graph.
    Tensor predict(const Tensor& a) const;

    Var lift(const Var& x) const;
    /// Features at scale `level` (2..K) from those at level-1.
    Var downsample(std::size_t level, const Var& x) const;
    /// Attention then conv-residual Fourier layers at scale `level` (1..K).
    Var process_scale(std::size_t level, const Var& a) const;
    /// Fuses decoder output of level+1 into level (1..K-1).
    Var upsample_fuse(std::size_t level, const Var& coarse, const Var& fine) const;
    Var head(const Var& u) const;

    /// Test hook: pins the attention maps to constants.
    layers::AttentionOverrides attention_overrides;

private:
    void bind();
    Var p(const std::string& name) const;
    Var maybe(const std::string& name) const;

    ModelConfig cfg_;
    std::vector<Var> params_;
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;

    std::vector<layers::AttentionParams> attention_;
    std::vector<std::vector<layers::ConvResFourierParams>> crf_;
};

}  // namespace hafno::model
