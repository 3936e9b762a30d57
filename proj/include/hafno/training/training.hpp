#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hafno/data/dataset.hpp"
#include "hafno/model/checkpoint.hpp"
#include "hafno/model/model.hpp"

namespace hafno::training {

using model::HierarchicalModel;
using model::OptimizerState;

enum class Schedule { cosine, constant };

struct TrainConfig {
    double lr = 5e-4;
    double lr_min = 1e-5;  // cosine floor
    std::size_t batch_size = 10;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    Schedule schedule = Schedule::cosine;
    double grad_clip = 0.0;  // global max-norm; 0 disables
    double divergence_factor = 1e3;
    /// Off by default so metrics files are reproducible byte for byte.
    bool record_wall_time = false;

    void validate() const;
    std::string to_text() const;
    /// Rejects unknown keys.
    static TrainConfig from_text(const std::string& text);
    bool operator==(const TrainConfig&) const = default;
};

/// "tiny": desk-scale defaults; "paper": lr 5e-4, batch 10. Throws Error(usage) otherwise.
TrainConfig preset_train_config(const std::string& preset);

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// (1/B) sum_i ||pred_i - truth_i|| / ||truth_i||. A zero-norm truth is rejected with its index.
double nmse(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth);

/// Learning rate for optimizer step `step` (0-based) out of `total_steps`.
double learning_rate(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

/// Bias-corrected Adam update of params[i] -= lr * m_hat / (sqrt(v_hat) + eps).
/// Moments are created on the first call. A non-finite gradient aborts with
/// Error(divergence) naming the parameter, before anything is modified.
void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names, OptimizerState& state, double lr);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    std::string split;      // "train" or "val"
    double nmse = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    OptimizerState optimizer;
    double initial_loss = 0.0;
};

/// Per-channel mean and std of inputs and targets over the dataset.
model::Normalizer fit_normalizer(const data::Dataset& ds);

/// Shuffled mini-batches from (seed, "shuffle", epoch); per-sample gradients of the
/// N-MSE loss are summed in batch order, then Adam steps once per batch.
///
/// `state` carries optimizer moments across calls: a fresh state fits the model's
/// normalizer to `train_set`; a state with epoch > 0 resumes from there and must
/// have been produced under an identical config. Training stops after
/// `stop_after_epoch` epochs in total when it is nonzero, else after cfg.epochs.
/// An empty (or null) validation set logs no val rows.
/// Throws Error(divergence) when a batch loss exceeds divergence_factor times the first one.
TrainResult train(HierarchicalModel& m, const data::Dataset& train_set, const data::Dataset* val_set,
                  const TrainConfig& cfg, std::optional<OptimizerState> state = std::nullopt,
                  std::size_t stop_after_epoch = 0);

struct EvalResult {
    double nmse = 0.0;
    std::vector<double> per_sample;
};

/// Read-only over the model. Throws Error(mismatch) on shape disagreement with the config.
EvalResult evaluate(const HierarchicalModel& m, const data::Dataset& ds, std::size_t threads = 1);

/// Autoregressive prediction: each output frame is appended to the window and the
/// oldest frame dropped. With renormalize set, every predicted frame is shifted
/// to zero spatial mean before being fed back.
Tensor rollout(const HierarchicalModel& m, const Tensor& initial_frames, std::size_t n_steps,
               bool renormalize = false);
/// Same loop over an arbitrary one-step predictor [T0,H,W] -> [1,H,W].
Tensor rollout(const std::function<Tensor(const Tensor&)>& step, const Tensor& initial_frames, std::size_t n_steps,
               bool renormalize = false);

/// Header `epoch,split,nmse,wall_seconds`.
std::string metrics_csv(const std::vector<EpochRecord>& history);

/// FNV-1a of all parameter bytes, for detecting mutation.
std::uint64_t parameter_hash(const HierarchicalModel& m);

/// Checkpoint with optimizer state and the serialized training config.
model::Checkpoint training_checkpoint(const HierarchicalModel& m, const OptimizerState& state);

/// Throws Error(mismatch) naming the first architectural difference (normalizer ignored).
void require_same_architecture(const model::ModelConfig& expected, const model::ModelConfig& actual);

}  // namespace hafno::training
