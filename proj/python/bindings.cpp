#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hafno/cli/cli.hpp"
#include "hafno/error.hpp"
#include "hafno/data/dataset.hpp"
#include "hafno/diagnostics/diagnostics.hpp"
#include "hafno/diagnostics/gradcheck.hpp"
#include "hafno/model/checkpoint.hpp"
#include "hafno/spectral/fft.hpp"
#include "hafno/training/training.hpp"

namespace py = pybind11;
using namespace hafno;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Tensor from_numpy(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

/// [C,H,W] or [H,W] (promoted to one channel).
Tensor field_from_numpy(const Array& a) {
    Tensor t = from_numpy(a);
    if (t.rank() == 2) return t.reshaped({1, t.dim(0), t.dim(1)});
    if (t.rank() != 3) throw std::invalid_argument("expected a [C,H,W] or [H,W] array");
    return t;
}

py::dict dataset_to_python(const data::Dataset& ds) {
    py::dict out;
    py::dict manifest;
    for (const auto& [k, v] : ds.manifest) manifest[py::str(k)] = v;
    out["manifest"] = manifest;
    py::list inputs, targets;
    for (const auto& s : ds.samples) {
        inputs.append(to_numpy(s.input));
        targets.append(to_numpy(s.target));
    }
    out["inputs"] = inputs;
    out["targets"] = targets;
    return out;
}

data::Dataset load_pairs(const std::string& dir, const std::string& split) {
    const auto splits = data::read_splits(dir);
    data::Dataset ds = split == "train" ? splits.train : splits.test;
    if (ds.manifest.count("benchmark") && ds.manifest.at("benchmark") == "ns" && !ds.manifest.count("windows")) {
        ds = data::trajectory_windows(ds);
    }
    return ds;
}

py::dict report_to_python(const diagnostics::SpectralErrorReport& r) {
    py::dict d;
    d["error_map"] = to_numpy(r.error_map);
    d["shifted_view"] = to_numpy(r.shifted_view);
    d["band_error_energy"] = r.band_error_energy;
    d["band_truth_energy"] = r.band_truth_energy;
    d["band_relative"] = r.band_relative;
    d["top_half_relative"] = r.top_half_relative();
    return d;
}

diagnostics::GroupElement parse_group(const std::string& g) {
    if (g == "rot90") return diagnostics::GroupElement::rot90;
    if (g == "flip_x") return diagnostics::GroupElement::flip_x;
    if (g == "flip_y") return diagnostics::GroupElement::flip_y;
    throw std::invalid_argument("group element must be rot90, flip_x or flip_y");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hierarchical attention neural operator core";

    py::register_exception<Error>(m, "HafnoError", PyExc_RuntimeError);

    m.def("rfft2", [](const Array& x) {
        const Tensor c = spectral::rfft2(field_from_numpy(x));
        ComplexArray out({c.dim(0), c.dim(1), c.dim(2)});
        const auto z = as_complex(c.data());
        std::copy(z.begin(), z.end(), out.mutable_data());
        return out;
    }, py::arg("x"), "Real 2-D FFT of a [C,H,W] field; returns complex [C,H,W/2+1].");

    m.def("irfft2", [](const ComplexArray& z, std::size_t H, std::size_t W) {
        if (z.ndim() != 3) throw std::invalid_argument("expected complex [C,H,W/2+1]");
        Tensor c(Shape{static_cast<std::size_t>(z.shape(0)), static_cast<std::size_t>(z.shape(1)),
                       static_cast<std::size_t>(z.shape(2)), 2});
        auto dst = as_complex(std::span<double>(c.storage()));
        std::copy(z.data(), z.data() + z.size(), dst.begin());
        return to_numpy(spectral::irfft2(c, H, W));
    }, py::arg("coeffs"), py::arg("height"), py::arg("width"));

    m.def("generate", [](const std::string& benchmark, const std::string& preset, std::uint64_t seed,
                         std::optional<std::size_t> resolution, std::optional<std::size_t> n_train,
                         std::optional<std::size_t> n_test, bool inverse, double noise_eps, std::size_t threads) {
        data::DatasetSpec spec = data::preset_spec(data::parse_benchmark(benchmark), preset);
        spec.seed = seed;
        if (resolution) spec.resolution = *resolution;
        if (n_train) spec.n_train = *n_train;
        if (n_test) spec.n_test = *n_test;
        spec.inverse = inverse;
        spec.noise_eps = noise_eps;
        spec.validate();
        data::DatasetSplits s;
        {
            py::gil_scoped_release release;
            s = data::build_dataset(spec, threads);
        }
        py::dict out;
        out["train"] = dataset_to_python(s.train);
        out["test"] = dataset_to_python(s.test);
        return out;
    }, py::arg("benchmark"), py::arg("preset") = "tiny", py::arg("seed") = 0, py::arg("resolution") = py::none(),
       py::arg("n_train") = py::none(), py::arg("n_test") = py::none(), py::arg("inverse") = false,
       py::arg("noise_eps") = 0.0, py::arg("threads") = 1,
       "Generate train/test splits in memory; each split is {manifest, inputs, targets}.");

    m.def("read_dataset", [](const std::string& path) { return dataset_to_python(data::read_dataset(path)); },
          py::arg("path"));

    py::class_<model::HierarchicalModel>(m, "Model")
        .def(py::init([](const std::string& preset, std::uint64_t seed, std::size_t coefficient_channels,
                         std::size_t output_channels, bool baseline_fno, std::optional<std::string> ablation) {
                 model::ModelConfig cfg = preset == "paper" ? model::default_config() : model::tiny_config();
                 if (preset != "paper" && preset != "tiny") throw std::invalid_argument("preset must be tiny or paper");
                 cfg.coefficient_channels = coefficient_channels;
                 cfg.output_channels = output_channels;
                 if (ablation) cfg = model::build_ablation(cfg, model::parse_ablation_arm(*ablation));
                 if (baseline_fno) cfg = model::matched_baseline(cfg);
                 return model::HierarchicalModel(cfg, seed);
             }),
             py::arg("preset") = "tiny", py::arg("seed") = 0, py::arg("coefficient_channels") = 1,
             py::arg("output_channels") = 1, py::arg("baseline_fno") = false, py::arg("ablation") = py::none())
        .def_static("from_config_text", [](const std::string& text, std::uint64_t seed) {
            return model::HierarchicalModel(model::ModelConfig::from_text(text), seed);
        }, py::arg("text"), py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return model::restore_model(model::load_checkpoint(path)); },
                    py::arg("path"))
        .def("save", [](const model::HierarchicalModel& self, const std::string& path) {
            model::save_checkpoint(model::make_checkpoint(self), path);
        }, py::arg("path"))
        .def("predict", [](const model::HierarchicalModel& self, const Array& a) {
            const Tensor in = field_from_numpy(a);
            Tensor out;
            {
                py::gil_scoped_release release;
                out = self.predict(in);
            }
            return to_numpy(out);
        }, py::arg("a"))
        .def_property_readonly("parameter_count", &model::HierarchicalModel::parameter_count)
        .def_property_readonly("config_text", [](const model::HierarchicalModel& self) { return self.config().to_text(); })
        .def("state", [](const model::HierarchicalModel& self) {
            py::dict d;
            for (const auto& [name, t] : self.state()) d[py::str(name)] = to_numpy(t);
            return d;
        });

    m.def("train", [](model::HierarchicalModel& mdl, const std::string& data_dir, std::size_t epochs, double lr,
                      std::size_t batch_size, std::uint64_t seed) {
        const data::Dataset train_set = load_pairs(data_dir, "train");
        const data::Dataset val_set = load_pairs(data_dir, "test");
        training::TrainConfig cfg = training::preset_train_config("tiny");
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.lr_min = std::min(cfg.lr_min, lr);
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        training::TrainResult r;
        {
            py::gil_scoped_release release;
            r = training::train(mdl, train_set, &val_set, cfg);
        }
        py::list rows;
        for (const auto& e : r.history) {
            py::dict row;
            row["epoch"] = e.epoch;
            row["split"] = e.split;
            row["nmse"] = e.nmse;
            rows.append(row);
        }
        return rows;
    }, py::arg("model"), py::arg("data_dir"), py::arg("epochs") = 1, py::arg("lr") = 1e-3, py::arg("batch_size") = 8,
       py::arg("seed") = 0, "Train on <data_dir>/train.hafd, validating on test.hafd; returns the epoch log.");

    m.def("evaluate", [](const model::HierarchicalModel& mdl, const std::string& data_dir, const std::string& split,
                         std::size_t threads) {
        const data::Dataset ds = load_pairs(data_dir, split);
        training::EvalResult r;
        {
            py::gil_scoped_release release;
            r = training::evaluate(mdl, ds, threads);
        }
        return py::make_tuple(r.nmse, r.per_sample);
    }, py::arg("model"), py::arg("data_dir"), py::arg("split") = "test", py::arg("threads") = 1);

    m.def("nmse", [](const std::vector<Array>& pred, const std::vector<Array>& truth) {
        std::vector<Tensor> p, t;
        for (const auto& a : pred) p.push_back(from_numpy(a));
        for (const auto& a : truth) t.push_back(from_numpy(a));
        return training::nmse(p, t);
    }, py::arg("pred"), py::arg("truth"));

    m.def("spectral_error_map", [](const Array& pred, const Array& truth, std::size_t n_bands) {
        return report_to_python(diagnostics::spectral_error_map(field_from_numpy(pred), field_from_numpy(truth), n_bands));
    }, py::arg("pred"), py::arg("truth"), py::arg("n_bands") = diagnostics::kDefaultBands);

    m.def("check_fourier_group_commutation", [](const Array& field, const std::string& g) {
        return diagnostics::check_fourier_group_commutation(field_from_numpy(field), parse_group(g));
    }, py::arg("field"), py::arg("group"));

    m.def("gradcheck_suite", []() {
        py::list out;
        for (const auto& e : diagnostics::gradcheck_suite()) {
            py::dict d;
            d["op"] = e.op;
            d["linear"] = e.linear;
            d["tolerance"] = e.tolerance;
            d["max_rel_error"] = e.result.max_rel_error;
            d["passed"] = e.passed();
            out.append(d);
        }
        return out;
    });

    m.def("run_cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Run a CLI command in-process; returns (exit_code, stdout, stderr).");
}
