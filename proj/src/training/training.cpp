#include "hafno/training/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hafno/core/ops.hpp"
#include "hafno/error.hpp"
#include "hafno/util/io.hpp"
#include "hafno/util/parallel.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::training {

namespace {

std::string schedule_name(Schedule s) { return s == Schedule::cosine ? "cosine" : "constant"; }

Schedule parse_schedule(const std::string& s) {
    if (s == "cosine") return Schedule::cosine;
    if (s == "constant") return Schedule::constant;
    throw Error(ErrorKind::usage, "unknown lr schedule '" + s + "' (expected cosine, constant)");
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || s.front() == '-')
        throw Error(ErrorKind::usage, "train config: " + key + " must be a non-negative integer, got '" + s + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& s) {
    try {
        return parse_double(s);
    } catch (const std::exception&) {
        throw Error(ErrorKind::usage, "train config: " + key + " must be a number, got '" + s + "'");
    }
}

void check_dataset(const HierarchicalModel& m, const data::Dataset& ds, const char* what) {
    const auto& cfg = m.config();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        if (s.input.rank() != 3 || s.input.dim(0) != cfg.coefficient_channels)
            throw Error(ErrorKind::mismatch, std::string(what) + " sample " + std::to_string(i) + ": input " +
                                                 shape_str(s.input.shape()) + " but the model takes " +
                                                 std::to_string(cfg.coefficient_channels) + " channels");
        if (s.target.rank() != 3 || s.target.dim(0) != cfg.output_channels || s.target.dim(1) != s.input.dim(1) ||
            s.target.dim(2) != s.input.dim(2))
            throw Error(ErrorKind::mismatch, std::string(what) + " sample " + std::to_string(i) + ": target " +
                                                 shape_str(s.target.shape()) + " does not match input " +
                                                 shape_str(s.input.shape()) + " with " +
                                                 std::to_string(cfg.output_channels) + " output channels");
        if (l2_norm(s.target) == 0.0)
            throw std::invalid_argument(std::string(what) + " sample " + std::to_string(i) + " has a zero-norm target");
    }
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, "shuffle", epoch);
    // Fisher-Yates with explicit draws; std::shuffle is not specified across library versions.
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next() % i]);
    return order;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::usage, "train config: " + m); };
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr must be positive");
    if (!(lr_min >= 0.0) || lr_min > lr) fail("lr_min must lie in [0, lr]");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(grad_clip >= 0.0)) fail("grad_clip must be >= 0");
    if (!(divergence_factor > 1.0)) fail("divergence_factor must exceed 1");
}

TrainConfig preset_train_config(const std::string& preset) {
    TrainConfig c;
    if (preset == "tiny") {
        c.lr = 1e-3;
        c.batch_size = 8;
        c.epochs = 100;
    } else if (preset == "paper") {
        c.lr = 5e-4;
        c.batch_size = 10;
        c.epochs = 500;
    } else {
        throw Error(ErrorKind::usage, "unknown preset '" + preset + "' (expected tiny or paper)");
    }
    return c;
}

std::string TrainConfig::to_text() const {
    KeyValues kv;
    kv["lr"] = format_double(lr);
    kv["lr_min"] = format_double(lr_min);
    kv["batch_size"] = std::to_string(batch_size);
    kv["epochs"] = std::to_string(epochs);
    kv["seed"] = std::to_string(seed);
    kv["schedule"] = schedule_name(schedule);
    kv["grad_clip"] = format_double(grad_clip);
    kv["divergence_factor"] = format_double(divergence_factor);
    kv["record_wall_time"] = record_wall_time ? "1" : "0";
    return to_canonical_text(kv);
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig c;
    for (const auto& [k, v] : parse_canonical_text(text)) {
        if (k == "lr") c.lr = parse_real(k, v);
        else if (k == "lr_min") c.lr_min = parse_real(k, v);
        else if (k == "batch_size") c.batch_size = parse_u64(k, v);
        else if (k == "epochs") c.epochs = parse_u64(k, v);
        else if (k == "seed") c.seed = parse_u64(k, v);
        else if (k == "schedule") c.schedule = parse_schedule(v);
        else if (k == "grad_clip") c.grad_clip = parse_real(k, v);
        else if (k == "divergence_factor") c.divergence_factor = parse_real(k, v);
        else if (k == "record_wall_time") c.record_wall_time = parse_u64(k, v) != 0;
        else throw Error(ErrorKind::usage, "train config: unknown key '" + k + "'");
    }
    c.validate();
    return c;
}

double nmse(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("nmse: need equal, nonzero batch sizes (got " + std::to_string(pred.size()) + " and " +
                                    std::to_string(truth.size()) + ")");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].shape() != truth[i].shape())
            throw std::invalid_argument("nmse: sample " + std::to_string(i) + " shape " + shape_str(pred[i].shape()) +
                                        " vs " + shape_str(truth[i].shape()));
        const double tn = l2_norm(truth[i]);
        if (tn == 0.0) throw std::invalid_argument("nmse: truth sample " + std::to_string(i) + " has zero norm");
        double s = 0.0;
        for (std::size_t j = 0; j < truth[i].size(); ++j) s += (pred[i][j] - truth[i][j]) * (pred[i][j] - truth[i][j]);
        total += std::sqrt(s) / tn;
    }
    return total / static_cast<double>(pred.size());
}

double learning_rate(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
    if (cfg.schedule == Schedule::constant || total_steps == 0) return cfg.lr;
    const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void adam_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
               const std::vector<std::string>& names, OptimizerState& state, double lr) {
    if (grads.size() != params.size() || names.size() != params.size())
        throw std::invalid_argument("adam_step: params, grads and names differ in length");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw Error(ErrorKind::mismatch, "adam_step: optimizer state has " + std::to_string(state.first_moment.size()) +
                                             " moments for " + std::to_string(params.size()) + " parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i]->shape() != params[i]->shape() || state.first_moment[i].shape() != params[i]->shape() ||
            state.second_moment[i].shape() != params[i]->shape())
            throw Error(ErrorKind::mismatch, "adam_step: shape mismatch for " + names[i]);
        if (!grads[i]->all_finite()) throw Error(ErrorKind::divergence, "adam_step: non-finite gradient in " + names[i]);
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(kAdamBeta1, t);
    const double c2 = 1.0 - std::pow(kAdamBeta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.first_moment[i];
        Tensor& v = state.second_moment[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
            v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
            p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEps);
        }
    }
}

model::Normalizer fit_normalizer(const data::Dataset& ds) {
    if (ds.samples.empty()) throw std::invalid_argument("fit_normalizer: empty dataset");
    auto stats = [&](bool input) {
        const std::size_t C = (input ? ds.samples[0].input : ds.samples[0].target).dim(0);
        std::vector<double> mean(C, 0.0), sd(C, 0.0);
        std::vector<double> count(C, 0.0);
        for (const auto& s : ds.samples) {
            const Tensor& t = input ? s.input : s.target;
            const std::size_t plane = t.dim(1) * t.dim(2);
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t i = 0; i < plane; ++i) mean[c] += t[c * plane + i];
                count[c] += static_cast<double>(plane);
            }
        }
        for (std::size_t c = 0; c < C; ++c) mean[c] /= count[c];
        for (const auto& s : ds.samples) {
            const Tensor& t = input ? s.input : s.target;
            const std::size_t plane = t.dim(1) * t.dim(2);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t i = 0; i < plane; ++i) sd[c] += (t[c * plane + i] - mean[c]) * (t[c * plane + i] - mean[c]);
        }
        for (std::size_t c = 0; c < C; ++c) {
            sd[c] = std::sqrt(sd[c] / count[c]);
            if (!(sd[c] > 0.0)) sd[c] = 1.0;  // constant channel
        }
        return std::pair{mean, sd};
    };
    model::Normalizer n;
    std::tie(n.input_mean, n.input_std) = stats(true);
    std::tie(n.output_mean, n.output_std) = stats(false);
    return n;
}

TrainResult train(HierarchicalModel& m, const data::Dataset& train_set, const data::Dataset* val_set,
                  const TrainConfig& cfg, std::optional<OptimizerState> state, std::size_t stop_after_epoch) {
    cfg.validate();
    if (train_set.samples.empty()) throw std::invalid_argument("train: empty training set");
    check_dataset(m, train_set, "train");
    const bool has_val = val_set && !val_set->samples.empty();
    if (has_val) check_dataset(m, *val_set, "val");

    TrainResult result;
    OptimizerState& st = result.optimizer;
    if (state && (state->step > 0 || state->epoch > 0)) {
        st = std::move(*state);
        if (st.training_config != cfg.to_text())
            throw Error(ErrorKind::mismatch, "train: resume state was produced under a different training config");
        if (st.epoch > cfg.epochs)
            throw Error(ErrorKind::mismatch, "train: resume state is past the configured epoch count");
    } else {
        m.set_normalizer(fit_normalizer(train_set));
        st.training_config = cfg.to_text();
    }
    const std::size_t last_epoch = stop_after_epoch ? std::min(stop_after_epoch, cfg.epochs) : cfg.epochs;

    const auto& params = m.parameters();
    const auto& names = m.parameter_names();
    std::vector<Tensor*> values;
    std::vector<const Tensor*> grads;
    for (const auto& p : params) {
        values.push_back(&p->value);
        grads.push_back(&p->grad_buffer());
    }

    const std::size_t N = train_set.samples.size();
    const std::size_t B = std::min(cfg.batch_size, N);
    const std::size_t batches = (N + B - 1) / B;
    const std::uint64_t total_steps = static_cast<std::uint64_t>(batches) * cfg.epochs;
    bool have_reference = false;
    const auto t0 = std::chrono::steady_clock::now();

    for (std::size_t epoch = st.epoch + 1; epoch <= last_epoch; ++epoch) {
        const auto order = shuffled_order(N, cfg.seed, epoch);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * B, hi = std::min(N, lo + B);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            zero_grad(params);
            double batch_loss = 0.0;
            try {
                for (std::size_t k = lo; k < hi; ++k) {
                    const auto& s = train_set.samples[order[k]];
                    Var loss = ops::relative_l2(m.forward(s.input), s.target);
                    batch_loss += loss->value.item();
                    backward(ops::scale(loss, inv));
                }
            } catch (const std::domain_error& e) {
                throw Error(ErrorKind::divergence, "train: epoch " + std::to_string(epoch) + " batch " +
                                                       std::to_string(b + 1) + ": " + e.what());
            }
            epoch_loss += batch_loss;
            batch_loss *= inv;
            if (!have_reference) {
                result.initial_loss = batch_loss;
                have_reference = true;
            } else if (!(batch_loss <= cfg.divergence_factor * result.initial_loss)) {
                std::ostringstream msg;
                msg << "train: diverged at epoch " << epoch << " batch " << b + 1 << ": loss " << batch_loss
                    << " exceeds " << cfg.divergence_factor << " x initial loss " << result.initial_loss;
                throw Error(ErrorKind::divergence, msg.str());
            }
            if (cfg.grad_clip > 0.0) {
                double sq = 0.0;
                for (const Tensor* g : grads)
                    for (double v : g->data()) sq += v * v;
                const double norm = std::sqrt(sq);
                if (norm > cfg.grad_clip) {
                    const double f = cfg.grad_clip / norm;
                    for (const auto& p : params)
                        for (double& v : p->grad.storage()) v *= f;
                }
            }
            adam_step(values, grads, names, st, learning_rate(cfg, st.step, total_steps));
        }
        st.epoch = epoch;
        const double wall = cfg.record_wall_time ? seconds_since(t0) : 0.0;
        result.history.push_back({epoch, "train", epoch_loss / static_cast<double>(N), wall});
        if (has_val) {
            const double v = evaluate(m, *val_set).nmse;
            result.history.push_back({epoch, "val", v, cfg.record_wall_time ? seconds_since(t0) : 0.0});
        }
    }
    zero_grad(params);
    return result;
}

EvalResult evaluate(const HierarchicalModel& m, const data::Dataset& ds, std::size_t threads) {
    if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    check_dataset(m, ds, "eval");
    EvalResult r;
    r.per_sample.resize(ds.samples.size());
    parallel_for(ds.samples.size(), threads, [&](std::size_t i) {
        const auto& s = ds.samples[i];
        r.per_sample[i] = nmse({m.predict(s.input)}, {s.target});
    });
    r.nmse = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) / static_cast<double>(r.per_sample.size());
    return r;
}

Tensor rollout(const std::function<Tensor(const Tensor&)>& step, const Tensor& initial_frames, std::size_t n_steps,
               bool renormalize) {
    if (n_steps < 1) throw std::invalid_argument("rollout: n_steps must be >= 1");
    if (initial_frames.rank() != 3 || initial_frames.dim(0) < 1)
        throw std::invalid_argument("rollout: initial frames must be [T0,H,W], got " + shape_str(initial_frames.shape()));
    const std::size_t T0 = initial_frames.dim(0), H = initial_frames.dim(1), W = initial_frames.dim(2);
    const std::size_t plane = H * W;
    Tensor window = initial_frames;
    Tensor out(Shape{n_steps, H, W});
    for (std::size_t s = 0; s < n_steps; ++s) {
        Tensor next = step(window);
        if (next.shape() != Shape{1, H, W})
            throw Error(ErrorKind::mismatch, "rollout: predictor returned " + shape_str(next.shape()));
        if (renormalize) {
            const double mean = std::accumulate(next.data().begin(), next.data().end(), 0.0) / static_cast<double>(plane);
            for (double& v : next.storage()) v -= mean;
        }
        std::copy(next.data().begin(), next.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(s * plane));
        auto w = window.data();
        std::copy(w.begin() + static_cast<std::ptrdiff_t>(plane), w.end(), w.begin());
        std::copy(next.data().begin(), next.data().end(), w.begin() + static_cast<std::ptrdiff_t>((T0 - 1) * plane));
    }
    return out;
}

Tensor rollout(const HierarchicalModel& m, const Tensor& initial_frames, std::size_t n_steps, bool renormalize) {
    const auto& cfg = m.config();
    if (initial_frames.rank() != 3 || initial_frames.dim(0) != cfg.coefficient_channels)
        throw Error(ErrorKind::mismatch, "rollout: initial frames " + shape_str(initial_frames.shape()) +
                                             " but the model conditions on " +
                                             std::to_string(cfg.coefficient_channels) + " frames");
    if (cfg.output_channels != 1) throw Error(ErrorKind::mismatch, "rollout: model must predict a single frame");
    return rollout([&m](const Tensor& w) { return m.predict(w); }, initial_frames, n_steps, renormalize);
}

std::string metrics_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,split,nmse,wall_seconds\n";
    for (const auto& r : history)
        out += std::to_string(r.epoch) + "," + r.split + "," + format_double(r.nmse) + "," + format_double(r.wall_seconds) + "\n";
    return out;
}

std::uint64_t parameter_hash(const HierarchicalModel& m) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : m.parameters()) {
        const auto d = p->value.data();
        h = fnv1a64({reinterpret_cast<const std::uint8_t*>(d.data()), d.size() * sizeof(double)}, h);
    }
    return h;
}

model::Checkpoint training_checkpoint(const HierarchicalModel& m, const OptimizerState& state) {
    return model::make_checkpoint(m, state);
}

void require_same_architecture(const model::ModelConfig& expected, const model::ModelConfig& actual) {
    model::ModelConfig a = expected, b = actual;
    a.normalizer = b.normalizer = {};
    if (a == b) return;
    const KeyValues ka = parse_canonical_text(a.to_text()), kb = parse_canonical_text(b.to_text());
    for (const auto& [k, v] : ka) {
        const auto it = kb.find(k);
        if (it == kb.end() || it->second != v)
            throw Error(ErrorKind::mismatch, "architecture mismatch in " + k + ": expected " + v + ", got " +
                                                 (it == kb.end() ? std::string("<missing>") : it->second));
    }
    throw Error(ErrorKind::mismatch, "architecture mismatch");
}

}  // namespace hafno::training
