#include "hafno/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "hafno/data/dataset.hpp"
#include "hafno/diagnostics/diagnostics.hpp"
#include "hafno/error.hpp"
#include "hafno/model/checkpoint.hpp"
#include "hafno/training/training.hpp"
#include "hafno/util/io.hpp"
#include "hafno/util/parallel.hpp"

namespace hafno::cli {

namespace fs = std::filesystem;

std::size_t resolve_threads(int flag_value) {
    if (flag_value > 0) return static_cast<std::size_t>(flag_value);
    if (flag_value < 0) throw Error(ErrorKind::usage, "--threads must be positive");
    const char* env = std::getenv("HAFNO_THREADS");
    if (env == nullptr || *env == '\0') return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw Error(ErrorKind::usage, std::string("HAFNO_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<std::size_t>(v);
}

namespace {

const std::vector<std::string> kPresets{"tiny", "paper"};
const std::vector<std::string> kBenchmarks{"trig", "darcy-rough", "darcy-smooth", "ns"};
const std::vector<std::string> kSplits{"train", "test"};
const std::vector<std::string> kArms{"wo_attention", "wo_fno", "conv_to_res", "conv_to_fc", "att_to_mlp", "add_hier"};

struct GenerateOptions {
    std::string benchmark;
    std::string preset = "tiny";
    std::optional<std::size_t> resolution, n_train, n_test, frames, input_frames;
    std::optional<double> nu, noise_eps;
    std::uint64_t seed = 0;
    bool inverse = false;
    std::string out;
    int threads = 0;
};

struct TrainOptions {
    std::string data, out, preset = "tiny";
    std::optional<double> lr, lr_min, grad_clip, divergence_factor;
    std::optional<std::size_t> batch, epochs;
    std::size_t stop_after = 0;
    std::optional<std::string> schedule, ablation, resume;
    std::uint64_t seed = 0;
    bool baseline_fno = false;
    bool wall_time = false;
    int threads = 0;
};

struct EvalOptions {
    std::string checkpoint, data, split = "test";
    std::optional<std::string> out;
    int threads = 0;
};

struct RolloutOptions {
    std::string checkpoint, data, split = "test", out;
    std::size_t sample = 0;
    std::optional<std::size_t> steps;
    bool renormalize = false;
    int threads = 0;
};

struct DiagnoseOptions {
    std::string data, split = "test", out;
    std::optional<std::string> checkpoint, predictions;
    std::size_t bands = diagnostics::kDefaultBands;
    std::size_t max_samples = 0;
    std::uint64_t seed = 0;
    int threads = 0;
};

void warn_paper_scale(const std::string& preset, std::ostream& err) {
    if (preset == "paper") {
        err << "warning: preset 'paper' targets accelerator-class hardware and runs for days on a desktop CPU\n";
    }
}

std::string sci2(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v << " (" << std::fixed << std::setprecision(3) << v * 100.0 << " x1e-2)";
    return os.str();
}

void echo_config(const CLI::App& sub, const fs::path& path) {
    write_text_file(path, "[" + sub.get_name() + "]\n" + sub.config_to_str(false, false));
}

data::DatasetSplits load_splits(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::missing_file, "dataset directory not found: " + dir);
    return data::read_splits(dir);
}

/// NS trajectories become one-step windows; everything else passes through.
data::Dataset as_training_pairs(const data::Dataset& ds) {
    if (ds.manifest.count("benchmark") && ds.manifest.at("benchmark") == "ns" && !ds.manifest.count("windows")) {
        return data::trajectory_windows(ds);
    }
    return ds;
}

model::HierarchicalModel load_model(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::missing_file, "checkpoint not found: " + path);
    return model::restore_model(model::load_checkpoint(path));
}

const data::Dataset& pick_split(const data::DatasetSplits& s, const std::string& split) {
    return split == "train" ? s.train : s.test;
}

int cmd_generate(const GenerateOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    data::DatasetSpec spec = data::preset_spec(data::parse_benchmark(o.benchmark), o.preset);
    spec.seed = o.seed;
    if (o.resolution) spec.resolution = *o.resolution;
    if (o.n_train) spec.n_train = *o.n_train;
    if (o.n_test) spec.n_test = *o.n_test;
    if (o.frames) spec.frames = *o.frames;
    if (o.input_frames) spec.input_frames = *o.input_frames;
    if (o.nu) spec.nu = *o.nu;
    if (o.noise_eps) spec.noise_eps = *o.noise_eps;
    spec.inverse = o.inverse;
    spec.validate();
    const std::size_t threads = resolve_threads(o.threads);
    warn_paper_scale(o.preset, err);

    const data::DatasetSplits splits = data::build_dataset(spec, threads);
    fs::create_directories(o.out);
    data::write_splits(splits, o.out);
    echo_config(sub, fs::path(o.out) / "generate.ini");
    const data::DatasetSplits back = data::read_splits(o.out);
    out << "generated " << data::to_string(spec.benchmark) << ": " << back.train.samples.size() << " train + "
        << back.test.samples.size() << " test samples at " << spec.resolution << "x" << spec.resolution
        << ", checksum train=" << back.train.manifest.at("checksum") << " test=" << back.test.manifest.at("checksum")
        << "\n";
    return 0;
}

training::TrainConfig train_config_from(const TrainOptions& o) {
    training::TrainConfig c = training::preset_train_config(o.preset);
    if (o.lr) c.lr = *o.lr;
    if (o.lr_min) c.lr_min = *o.lr_min;
    if (o.batch) c.batch_size = *o.batch;
    if (o.epochs) c.epochs = *o.epochs;
    if (o.grad_clip) c.grad_clip = *o.grad_clip;
    if (o.divergence_factor) c.divergence_factor = *o.divergence_factor;
    if (o.schedule) {
        if (*o.schedule == "cosine") c.schedule = training::Schedule::cosine;
        else if (*o.schedule == "constant") c.schedule = training::Schedule::constant;
        else throw Error(ErrorKind::usage, "--schedule must be cosine or constant");
    }
    c.seed = o.seed;
    c.record_wall_time = o.wall_time;
    if (!o.lr_min && c.lr_min > c.lr) c.lr_min = c.lr;
    c.validate();
    return c;
}

model::ModelConfig model_config_from(const TrainOptions& o, const data::Dataset& train_set) {
    if (o.ablation && o.baseline_fno) throw Error(ErrorKind::usage, "--ablation and --baseline-fno are exclusive");
    model::ModelConfig cfg = o.preset == "paper" ? model::default_config() : model::tiny_config();
    if (train_set.samples.empty()) throw Error(ErrorKind::mismatch, "training split is empty");
    cfg.coefficient_channels = train_set.samples.front().input.dim(0);
    cfg.output_channels = train_set.samples.front().target.dim(0);
    if (o.ablation) cfg = model::build_ablation(cfg, model::parse_ablation_arm(*o.ablation));
    if (o.baseline_fno) cfg = model::matched_baseline(cfg);
    cfg.validate();
    return cfg;
}

void add_prefixed(KeyValues& kv, const std::string& prefix, const std::string& text) {
    for (const auto& [k, v] : parse_canonical_text(text)) kv[prefix + k] = v;
}

int cmd_train(const TrainOptions& o, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const training::TrainConfig tc = train_config_from(o);
    const std::size_t threads = resolve_threads(o.threads);
    warn_paper_scale(o.preset, err);
    (void)threads;  // training accumulates gradients serially for bit-reproducibility

    const data::DatasetSplits splits = load_splits(o.data);
    const data::Dataset train_set = as_training_pairs(splits.train);
    const data::Dataset val_set = as_training_pairs(splits.test);
    const model::ModelConfig cfg = model_config_from(o, train_set);

    std::optional<model::OptimizerState> state;
    std::optional<model::HierarchicalModel> m;
    if (o.resume) {
        if (!fs::exists(*o.resume)) throw Error(ErrorKind::missing_file, "checkpoint not found: " + *o.resume);
        const model::Checkpoint ck = model::load_checkpoint(*o.resume);
        training::require_same_architecture(cfg, ck.config);
        if (!ck.optimizer) throw Error(ErrorKind::mismatch, "checkpoint has no optimizer state to resume from");
        m.emplace(model::restore_model(ck));
        state = ck.optimizer;
    } else {
        m.emplace(cfg, o.seed);
    }

    const training::TrainResult r = training::train(*m, train_set, &val_set, tc, state, o.stop_after);

    fs::create_directories(o.out);
    const fs::path dir(o.out);
    model::save_checkpoint(training::training_checkpoint(*m, r.optimizer), dir / "model.ckpt");
    write_text_file(dir / "metrics.csv", training::metrics_csv(r.history));
    echo_config(sub, dir / "train.ini");

    KeyValues manifest;
    manifest["ablation"] = o.ablation.value_or("none");
    manifest["baseline_fno"] = o.baseline_fno ? "1" : "0";
    manifest["param_count"] = std::to_string(m->parameter_count());
    manifest["data.train_checksum"] = splits.train.manifest.at("checksum");
    manifest["data.test_checksum"] = splits.test.manifest.at("checksum");
    manifest["initial_loss"] = format_double(r.initial_loss);
    add_prefixed(manifest, "train.", tc.to_text());
    add_prefixed(manifest, "model.", m->config().to_text());
    write_text_file(dir / "train.manifest", to_canonical_text(manifest));

    double last_train = 0.0, last_val = -1.0;
    for (const auto& row : r.history) (row.split == "val" ? last_val : last_train) = row.nmse;
    out << "parameters: " << m->parameter_count() << "\n";
    out << "final train N-MSE: " << sci2(last_train) << "\n";
    if (last_val >= 0.0) out << "final val N-MSE: " << sci2(last_val) << "\n";
    return 0;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
    const std::size_t threads = resolve_threads(o.threads);
    const model::HierarchicalModel m = load_model(o.checkpoint);
    const data::Dataset ds = as_training_pairs(pick_split(load_splits(o.data), o.split));
    const training::EvalResult r = training::evaluate(m, ds, threads);
    if (o.out) {
        std::ostringstream csv;
        csv << "sample,nmse\n";
        for (std::size_t i = 0; i < r.per_sample.size(); ++i) csv << i << ',' << format_double(r.per_sample[i]) << '\n';
        write_text_file(*o.out, csv.str());
    }
    out << o.split << " N-MSE: " << sci2(r.nmse) << "\n";
    return 0;
}

int cmd_rollout(const RolloutOptions& o, const CLI::App& sub, std::ostream& out) {
    (void)resolve_threads(o.threads);
    const model::HierarchicalModel m = load_model(o.checkpoint);
    const data::DatasetSplits splits = load_splits(o.data);
    const data::Dataset& ds = pick_split(splits, o.split);
    if (!ds.manifest.count("benchmark") || ds.manifest.at("benchmark") != "ns") {
        throw Error(ErrorKind::mismatch, "rollout needs an NS trajectory dataset");
    }
    if (o.sample >= ds.samples.size()) {
        throw Error(ErrorKind::usage, "--sample " + std::to_string(o.sample) + " out of range (" +
                                          std::to_string(ds.samples.size()) + " trajectories)");
    }
    const data::Sample& s = ds.samples[o.sample];
    const std::size_t steps = o.steps.value_or(s.target.dim(0));
    if (steps < 1) throw Error(ErrorKind::usage, "--steps must be >= 1");
    if (m.config().coefficient_channels != s.input.dim(0)) {
        throw Error(ErrorKind::mismatch, "model expects " + std::to_string(m.config().coefficient_channels) +
                                             " conditioning frames, dataset has " + std::to_string(s.input.dim(0)));
    }
    const Tensor pred = training::rollout(m, s.input, steps, o.renormalize);

    data::Dataset result;
    result.manifest = ds.manifest;
    result.manifest["rollout.source_checksum"] = ds.manifest.at("checksum");
    result.manifest["rollout.sample"] = std::to_string(o.sample);
    result.manifest["rollout.steps"] = std::to_string(steps);
    result.manifest["rollout.renormalize"] = o.renormalize ? "1" : "0";
    result.samples.push_back({s.input, pred});
    const fs::path path(o.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    data::write_dataset(result, path);
    echo_config(sub, fs::path(o.out).replace_extension(".ini"));

    out << "rollout: " << steps << " frames written to " << o.out << "\n";
    // Error of the last predicted frame that has ground truth.
    const std::size_t last = std::min(steps, s.target.dim(0));
    const std::size_t plane = s.target.size() / s.target.dim(0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = (last - 1) * plane; i < last * plane; ++i) {
        num += (pred[i] - s.target[i]) * (pred[i] - s.target[i]);
        den += s.target[i] * s.target[i];
    }
    out << "relative L2 error at frame " << last << ": " << format_double(std::sqrt(num / den)) << "\n";
    return 0;
}

int cmd_diagnose(const DiagnoseOptions& o, const CLI::App& sub, std::ostream& out) {
    if (o.checkpoint.has_value() == o.predictions.has_value()) {
        throw Error(ErrorKind::usage, "pass exactly one of --checkpoint and --predictions");
    }
    if (o.bands < 1) throw Error(ErrorKind::usage, "--bands must be >= 1");
    const std::size_t threads = resolve_threads(o.threads);
    const data::Dataset ds = as_training_pairs(pick_split(load_splits(o.data), o.split));
    std::size_t n = ds.samples.size();
    if (o.max_samples > 0) n = std::min(n, o.max_samples);
    if (n == 0) throw Error(ErrorKind::mismatch, "dataset split is empty");

    std::vector<Tensor> preds(n);
    std::optional<model::HierarchicalModel> m;
    if (o.checkpoint) {
        m.emplace(load_model(*o.checkpoint));
        const model::HierarchicalModel& model = *m;
        training::evaluate(model, data::Dataset{ds.manifest, {ds.samples.front()}});  // shape check
        parallel_for(n, threads, [&](std::size_t i) { preds[i] = model.predict(ds.samples[i].input); });
    } else {
        if (!fs::exists(*o.predictions)) throw Error(ErrorKind::missing_file, "predictions not found: " + *o.predictions);
        const data::Dataset p = data::read_dataset(*o.predictions);
        if (p.samples.size() < n) throw Error(ErrorKind::mismatch, "predictions hold fewer samples than the dataset");
        for (std::size_t i = 0; i < n; ++i) {
            if (p.samples[i].target.shape() != ds.samples[i].target.shape()) {
                throw Error(ErrorKind::mismatch, "prediction " + std::to_string(i) + " has shape " +
                                                     shape_str(p.samples[i].target.shape()));
            }
            preds[i] = p.samples[i].target;
        }
    }

    std::vector<diagnostics::SpectralErrorReport> reports(n);
    parallel_for(n, threads, [&](std::size_t i) {
        reports[i] = diagnostics::spectral_error_map(preds[i], ds.samples[i].target, o.bands);
    });
    const auto agg = diagnostics::aggregate_reports(reports);

    fs::create_directories(o.out);
    const fs::path dir(o.out);
    write_text_file(dir / "error_map.csv", diagnostics::error_map_csv(agg));
    write_text_file(dir / "bands.csv", diagnostics::band_csv(agg));
    write_text_file(dir / "spectrum.pgm", diagnostics::pgm16(agg.shifted_view));
    echo_config(sub, dir / "diagnose.ini");
    out << "samples: " << n << "\n";
    out << "top-half band relative error: " << format_double(agg.top_half_relative()) << "\n";

    if (m) {
        const std::size_t side = m->config().padded_side(ds.samples.front().input.dim(1));
        const auto entries = diagnostics::model_equivariance_report(*m, side, o.seed);
        write_text_file(dir / "equivariance.csv", diagnostics::equivariance_text(entries));
        bool ok = true;
        for (const auto& e : entries) ok = ok && e.passed();
        out << "equivariance checks: " << (ok ? "pass" : "FAIL") << "\n";
    }
    return 0;
}

void add_threads(CLI::App* sub, int& threads) {
    sub->add_option("--threads", threads,
                    "Worker threads (default: HAFNO_THREADS, else 1; results do not depend on it)")
        ->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical attention neural operator: data, training, evaluation, diagnostics", "hafno"};
    app.set_config("--config", "", "INI file; [generate]/[train]/[eval]/[rollout]/[diagnose] sections, flags win")
        ->check(CLI::ExistingFile);
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", "hafno 0.1.0");

    GenerateOptions g;
    auto* gen = app.add_subcommand("generate", "Generate a benchmark dataset (train.hafd + test.hafd)");
    gen->add_option("--benchmark", g.benchmark, "Benchmark family")->required()->check(CLI::IsMember(kBenchmarks));
    gen->add_option("--preset", g.preset, "Size preset")->check(CLI::IsMember(kPresets))->capture_default_str();
    gen->add_option("--resolution", g.resolution, "Output grid side (preset value if unset)");
    gen->add_option("--n-train", g.n_train, "Training samples (preset value if unset)");
    gen->add_option("--n-test", g.n_test, "Test samples (preset value if unset)");
    gen->add_option("--seed", g.seed, "Base seed; sample i uses a seed derived from seed + i")->capture_default_str();
    gen->add_option("--nu", g.nu, "NS viscosity");
    gen->add_option("--frames", g.frames, "NS recorded frames T");
    gen->add_option("--input-frames", g.input_frames, "NS conditioning frames T0");
    gen->add_flag("--inverse", g.inverse, "Elliptic only: map noisy solution to coefficient");
    gen->add_option("--noise-eps", g.noise_eps, "Inverse-task relative noise level");
    gen->add_option("--out", g.out, "Output directory")->required();
    add_threads(gen, g.threads);

    TrainOptions t;
    auto* tr = app.add_subcommand("train", "Train a model; writes model.ckpt, metrics.csv and train.manifest");
    tr->add_option("--data", t.data, "Dataset directory from generate")->required();
    tr->add_option("--out", t.out, "Output directory")->required();
    tr->add_option("--preset", t.preset, "Model and schedule preset")->check(CLI::IsMember(kPresets))->capture_default_str();
    tr->add_option("--lr", t.lr, "Peak learning rate");
    tr->add_option("--lr-min", t.lr_min, "Cosine floor");
    tr->add_option("--batch", t.batch, "Batch size");
    tr->add_option("--epochs", t.epochs, "Total epochs");
    tr->add_option("--schedule", t.schedule, "Learning-rate schedule")->check(CLI::IsMember({"cosine", "constant"}));
    tr->add_option("--grad-clip", t.grad_clip, "Global gradient-norm clip (0 disables)");
    tr->add_option("--divergence-factor", t.divergence_factor, "Abort when a batch loss exceeds this multiple of the first");
    tr->add_option("--seed", t.seed, "Initialisation and shuffling seed")->capture_default_str();
    tr->add_option("--ablation", t.ablation, "Ablation arm")->check(CLI::IsMember(kArms));
    tr->add_flag("--baseline-fno", t.baseline_fno, "Train a plain FNO with a matched parameter budget");
    tr->add_flag("--wall-time", t.wall_time, "Record wall-clock seconds in metrics.csv (breaks byte reproducibility)");
    tr->add_option("--resume", t.resume, "Continue from a checkpoint written by train");
    tr->add_option("--stop-after", t.stop_after, "Stop once this many epochs are complete (0: run all); resumable")
        ->capture_default_str();
    add_threads(tr, t.threads);

    EvalOptions e;
    auto* ev = app.add_subcommand("eval", "Report N-MSE of a checkpoint on a dataset split");
    ev->add_option("--checkpoint", e.checkpoint, "Checkpoint file")->required();
    ev->add_option("--data", e.data, "Dataset directory")->required();
    ev->add_option("--split", e.split, "Split to evaluate")->check(CLI::IsMember(kSplits))->capture_default_str();
    ev->add_option("--out", e.out, "Per-sample CSV (sample,nmse)");
    add_threads(ev, e.threads);

    RolloutOptions r;
    auto* ro = app.add_subcommand("rollout", "Autoregressive NS prediction from a trajectory's conditioning frames");
    ro->add_option("--checkpoint", r.checkpoint, "Checkpoint file")->required();
    ro->add_option("--data", r.data, "NS dataset directory")->required();
    ro->add_option("--split", r.split, "Split holding the trajectory")->check(CLI::IsMember(kSplits))->capture_default_str();
    ro->add_option("--sample", r.sample, "Trajectory index")->capture_default_str();
    ro->add_option("--steps", r.steps, "Frames to predict (default: the trajectory's target length)");
    ro->add_flag("--renormalize", r.renormalize, "Shift each predicted frame to zero mean before feeding it back");
    ro->add_option("--out", r.out, "Output dataset file")->required();
    add_threads(ro, r.threads);

    DiagnoseOptions d;
    auto* di = app.add_subcommand("diagnose", "Spectral error report and equivariance checks");
    di->add_option("--data", d.data, "Dataset directory")->required();
    di->add_option("--split", d.split, "Split to analyse")->check(CLI::IsMember(kSplits))->capture_default_str();
    di->add_option("--checkpoint", d.checkpoint, "Checkpoint whose predictions are analysed");
    di->add_option("--predictions", d.predictions, "Dataset file whose targets are the predictions");
    di->add_option("--bands", d.bands, "Radial frequency bands")->capture_default_str();
    di->add_option("--max-samples", d.max_samples, "Analyse at most this many samples (0: all)")->capture_default_str();
    di->add_option("--seed", d.seed, "Seed for equivariance probe inputs")->capture_default_str();
    di->add_option("--out", d.out, "Output directory")->required();
    add_threads(di, d.threads);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& v) {
        out << v.what() << "\n";
        return 0;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n";
        if (!app.get_subcommands().empty()) err << "run '" << app.get_subcommands().front()->get_name() << " --help' for usage\n";
        return static_cast<int>(ErrorKind::usage);
    }

    try {
        if (gen->parsed()) return cmd_generate(g, *gen, out, err);
        if (tr->parsed()) return cmd_train(t, *tr, out, err);
        if (ev->parsed()) return cmd_eval(e, out);
        if (ro->parsed()) return cmd_rollout(r, *ro, out);
        if (di->parsed()) return cmd_diagnose(d, *di, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return static_cast<int>(ex.kind());
    } catch (const std::invalid_argument& ex) {
        err << "error: " << ex.what() << "\n";
        return static_cast<int>(ErrorKind::usage);
    } catch (const std::domain_error& ex) {
        err << "error: " << ex.what() << "\n";
        return static_cast<int>(ErrorKind::divergence);
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << "\n";
        return 1;
    }
    return static_cast<int>(ErrorKind::usage);
}

}  // namespace hafno::cli
