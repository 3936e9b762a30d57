#include "hafno/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "hafno/data/coefficients.hpp"
#include "hafno/data/elliptic.hpp"
#include "hafno/data/grid.hpp"
#include "hafno/data/navier_stokes.hpp"
#include "hafno/error.hpp"
#include "hafno/util/parallel.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::data {

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::size_t parse_size(const KeyValues& kv, const std::string& key) {
    const std::string& s = require_key(kv, key);
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
        throw FormatError(FormatErrorCode::malformed, "manifest key " + key + ": not an unsigned integer: " + s);
    }
}

double parse_real(const KeyValues& kv, const std::string& key) {
    try {
        return parse_double(require_key(kv, key));
    } catch (const FormatError&) {
        throw;
    } catch (const std::exception&) {
        throw FormatError(FormatErrorCode::malformed, "manifest key " + key + ": not a number");
    }
}

GridField coefficient_on_solve_grid(const DatasetSpec& spec, std::uint64_t seed) {
    const std::size_t m = spec.solve_resolution();
    switch (spec.benchmark) {
        case Benchmark::trig:
            return gen_trig_coefficient(seed, m);
        case Benchmark::darcy_rough:
            return sample_grf_twophase(seed, m, spec.grf_c, spec.a_min, spec.a_max, spec.grf_modes);
        case Benchmark::darcy_smooth:
            return sample_grf_smooth(seed, m, GrfParams{spec.grf_c, spec.grf_modes});
        case Benchmark::ns:
            break;
    }
    throw std::logic_error("coefficient_on_solve_grid: not an elliptic benchmark");
}

Tensor channel_slice(const Tensor& x, std::size_t begin, std::size_t count) {
    const std::size_t plane = x.dim(1) * x.dim(2);
    Tensor out(Shape{count, x.dim(1), x.dim(2)});
    const auto first = x.data().begin() + static_cast<std::ptrdiff_t>(begin * plane);
    std::copy(first, first + static_cast<std::ptrdiff_t>(count * plane), out.data().begin());
    return out;
}

}  // namespace

std::string to_string(Benchmark b) {
    switch (b) {
        case Benchmark::trig: return "trig";
        case Benchmark::darcy_rough: return "darcy-rough";
        case Benchmark::darcy_smooth: return "darcy-smooth";
        case Benchmark::ns: return "ns";
    }
    return "?";
}

Benchmark parse_benchmark(const std::string& s) {
    if (s == "trig") return Benchmark::trig;
    if (s == "darcy-rough" || s == "darcy_rough") return Benchmark::darcy_rough;
    if (s == "darcy-smooth" || s == "darcy_smooth") return Benchmark::darcy_smooth;
    if (s == "ns") return Benchmark::ns;
    throw Error(ErrorKind::usage, "unknown benchmark '" + s + "' (expected trig, darcy-rough, darcy-smooth, ns)");
}

void DatasetSpec::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::usage, "dataset spec: " + m); };
    if (n_train < 1 || n_test < 1) fail("n_train and n_test must be >= 1");
    if (benchmark == Benchmark::ns) {
        if (resolution < 8 || (resolution & (resolution - 1)) != 0) fail("NS resolution must be a power of two >= 8");
        if (!(nu > 0.0)) fail("nu must be positive");
        if (input_frames < 1 || frames <= input_frames) fail("need frames > input_frames >= 1");
        if (!(cfl > 0.0 && cfl < 0.5)) fail("cfl must lie in (0, 0.5)");
        if (inverse) fail("the inverse direction applies to elliptic benchmarks only");
    } else {
        if (resolution < 16) fail("resolution must be >= 16");
        if (solve_factor < 1) fail("solve_factor must be >= 1");
        if (!(pcg_tol > 0.0)) fail("pcg_tol must be positive");
        if (!(grf_c > 0.0)) fail("grf c must be positive");
        if (!(a_max > a_min && a_min > 0.0)) fail("need a_max > a_min > 0");
        if (grf_modes < 1) fail("grf modes must be >= 1");
    }
    if (!(noise_eps >= 0.0)) fail("noise_eps must be >= 0");
}

KeyValues DatasetSpec::to_manifest() const {
    KeyValues kv;
    kv["benchmark"] = to_string(benchmark);
    kv["preset"] = preset;
    kv["resolution"] = std::to_string(resolution);
    kv["n_train"] = std::to_string(n_train);
    kv["n_test"] = std::to_string(n_test);
    kv["seed"] = std::to_string(seed);
    kv["generator_version"] = kGeneratorVersion;
    kv["inverse"] = inverse ? "1" : "0";
    kv["noise_eps"] = format_double(noise_eps);
    if (benchmark == Benchmark::ns) {
        kv["ns.nu"] = format_double(nu);
        kv["ns.frames"] = std::to_string(frames);
        kv["ns.input_frames"] = std::to_string(input_frames);
        kv["ns.dt_max"] = format_double(dt_max);
        kv["ns.cfl"] = format_double(cfl);
        kv["ns.forcing_amplitude"] = format_double(forcing_amplitude);
    } else {
        kv["solve_factor"] = std::to_string(solve_factor);
        kv["pcg_tol"] = format_double(pcg_tol);
        kv["grf.c"] = format_double(grf_c);
        kv["grf.a_min"] = format_double(a_min);
        kv["grf.a_max"] = format_double(a_max);
        kv["grf.modes"] = std::to_string(grf_modes);
    }
    return kv;
}

DatasetSpec DatasetSpec::from_manifest(const KeyValues& kv) {
    if (require_key(kv, "generator_version") != kGeneratorVersion)
        throw FormatError(FormatErrorCode::version_mismatch,
                          "dataset generator version " + kv.at("generator_version") + " != " + kGeneratorVersion);
    DatasetSpec s;
    s.benchmark = parse_benchmark(require_key(kv, "benchmark"));
    s.preset = require_key(kv, "preset");
    s.resolution = parse_size(kv, "resolution");
    s.n_train = parse_size(kv, "n_train");
    s.n_test = parse_size(kv, "n_test");
    s.seed = parse_size(kv, "seed");
    s.inverse = require_key(kv, "inverse") == "1";
    s.noise_eps = parse_real(kv, "noise_eps");
    if (s.benchmark == Benchmark::ns) {
        s.nu = parse_real(kv, "ns.nu");
        s.frames = parse_size(kv, "ns.frames");
        s.input_frames = parse_size(kv, "ns.input_frames");
        s.dt_max = parse_real(kv, "ns.dt_max");
        s.cfl = parse_real(kv, "ns.cfl");
        s.forcing_amplitude = parse_real(kv, "ns.forcing_amplitude");
    } else {
        s.solve_factor = parse_size(kv, "solve_factor");
        s.pcg_tol = parse_real(kv, "pcg_tol");
        s.grf_c = parse_real(kv, "grf.c");
        s.a_min = parse_real(kv, "grf.a_min");
        s.a_max = parse_real(kv, "grf.a_max");
        s.grf_modes = parse_size(kv, "grf.modes");
    }
    return s;
}

DatasetSpec preset_spec(Benchmark b, const std::string& preset) {
    DatasetSpec s;
    s.benchmark = b;
    s.preset = preset;
    if (preset == "tiny") {
        if (b == Benchmark::ns) {
            s.n_train = 16;
            s.n_test = 4;
        }
        return s;
    }
    if (preset != "paper") throw Error(ErrorKind::usage, "unknown preset '" + preset + "' (expected tiny, paper)");
    switch (b) {
        case Benchmark::trig:
            s.resolution = 256;
            s.solve_factor = 4;
            s.n_train = 1000;
            s.n_test = 100;
            break;
        case Benchmark::darcy_rough:
            s.resolution = 256;
            s.n_train = 1000;
            s.n_test = 100;
            break;
        case Benchmark::darcy_smooth:
            s.resolution = 64;
            s.n_train = 1000;
            s.n_test = 200;
            break;
        case Benchmark::ns:
            s.n_train = 1000;
            s.n_test = 200;
            s.frames = 50;
            break;
    }
    return s;
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t global_index) {
    return derive_seed(seed + global_index, "sample");
}

Sample generate_sample(const DatasetSpec& spec, std::size_t global_index) {
    const std::uint64_t seed = sample_seed(spec.seed, global_index);
    if (spec.benchmark == Benchmark::ns) {
        NSSpec ns;
        ns.nu = spec.nu;
        ns.resolution = spec.resolution;
        ns.frames = spec.frames;
        ns.dt_max = spec.dt_max;
        ns.cfl = spec.cfl;
        ns.forcing_amplitude = spec.forcing_amplitude;
        const Tensor w0 = sample_periodic_grf(seed, spec.resolution);
        const Tensor traj = solve_ns_vorticity(w0, ns_forcing(ns), ns);
        return {channel_slice(traj, 0, spec.input_frames),
                channel_slice(traj, spec.input_frames, spec.frames - spec.input_frames)};
    }
    const GridField a_fine = coefficient_on_solve_grid(spec, seed);
    const EllipticSolution sol = solve_elliptic_fd(a_fine, constant_like(a_fine, 1.0), spec.pcg_tol);
    Tensor a = downsample_field(a_fine, spec.resolution).values;
    Tensor u = downsample_field(sol.u, spec.resolution).values;
    if (spec.inverse) return {add_noise(u, spec.noise_eps, seed), std::move(a)};
    return {std::move(a), std::move(u)};
}

DatasetSplits build_dataset(const DatasetSpec& spec, std::size_t threads) {
    spec.validate();
    const std::size_t total = spec.n_train + spec.n_test;
    std::vector<Sample> all(total);
    parallel_for(total, threads, [&](std::size_t i) { all[i] = generate_sample(spec, i); });

    DatasetSplits out;
    out.train.manifest = out.test.manifest = spec.to_manifest();
    out.train.manifest["split"] = "train";
    out.test.manifest["split"] = "test";
    out.train.samples.assign(std::make_move_iterator(all.begin()),
                             std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(spec.n_train)));
    out.test.samples.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(spec.n_train)),
                            std::make_move_iterator(all.end()));
    return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
    ByteWriter payload;
    payload.u64(ds.samples.size());
    for (const auto& s : ds.samples) {
        payload.tensor(s.input);
        payload.tensor(s.target);
    }
    KeyValues manifest = ds.manifest;
    manifest["count"] = std::to_string(ds.samples.size());
    manifest["checksum"] = hex64(fnv1a64(payload.buffer()));
    const std::string text = to_canonical_text(manifest);

    ByteWriter w;
    w.bytes(std::string_view(kDatasetMagic, 4));
    w.u16(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.bytes(text);
    auto& buf = w.buffer();
    buf.insert(buf.end(), payload.buffer().begin(), payload.buffer().end());
    return buf;
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.bytes(4) != std::string_view(kDatasetMagic, 4))
        throw FormatError(FormatErrorCode::bad_magic, "dataset: bad magic");
    const auto version = r.u16();
    if (version != kDatasetVersion)
        throw FormatError(FormatErrorCode::version_mismatch,
                          "dataset: version " + std::to_string(version) + " != " + std::to_string(kDatasetVersion));
    const auto text_len = r.u32();
    Dataset ds;
    ds.manifest = parse_canonical_text(r.bytes(text_len));

    const auto payload = bytes.subspan(r.position());
    const std::string expected = require_key(ds.manifest, "checksum");
    const std::string actual = hex64(fnv1a64(payload));
    // Structural problems (truncation) take precedence over the checksum verdict.
    const auto count = r.u64();
    if (count != parse_size(ds.manifest, "count"))
        throw FormatError(FormatErrorCode::malformed, "dataset: payload count " + std::to_string(count) +
                                                          " != manifest count " + ds.manifest.at("count"));
    ds.samples.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Sample s;
        s.input = r.tensor();
        s.target = r.tensor();
        ds.samples.push_back(std::move(s));
    }
    if (r.remaining() != 0) throw FormatError(FormatErrorCode::malformed, "dataset: trailing bytes");
    if (actual != expected)
        throw FormatError(FormatErrorCode::checksum_mismatch,
                          "dataset: checksum mismatch (manifest " + expected + ", payload " + actual + ")");
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) { write_file(path, encode_dataset(ds)); }

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split) {
    return dir / (split + ".hafd");
}

void write_splits(const DatasetSplits& s, const std::filesystem::path& dir) {
    write_dataset(s.train, split_path(dir, "train"));
    write_dataset(s.test, split_path(dir, "test"));
}

DatasetSplits read_splits(const std::filesystem::path& dir) {
    return {read_dataset(split_path(dir, "train")), read_dataset(split_path(dir, "test"))};
}

DatasetSpec dataset_spec(const Dataset& ds) { return DatasetSpec::from_manifest(ds.manifest); }

Dataset trajectory_windows(const Dataset& ns) {
    const DatasetSpec spec = dataset_spec(ns);
    if (spec.benchmark != Benchmark::ns) throw Error(ErrorKind::mismatch, "trajectory_windows: not an NS dataset");
    const std::size_t t0 = spec.input_frames;
    Dataset out;
    out.manifest = ns.manifest;
    out.manifest["windows"] = "1";
    for (const auto& s : ns.samples) {
        const std::size_t n = s.input.dim(1);
        Tensor traj(Shape{s.input.dim(0) + s.target.dim(0), n, n});
        std::copy(s.input.data().begin(), s.input.data().end(), traj.data().begin());
        std::copy(s.target.data().begin(), s.target.data().end(),
                  traj.data().begin() + static_cast<std::ptrdiff_t>(s.input.size()));
        for (std::size_t start = 0; start + t0 < traj.dim(0); ++start)
            out.samples.push_back({channel_slice(traj, start, t0), channel_slice(traj, start + t0, 1)});
    }
    return out;
}

}  // namespace hafno::data
