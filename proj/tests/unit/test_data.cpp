#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "hafno/data/coefficients.hpp"
#include "hafno/data/dataset.hpp"
#include "hafno/data/elliptic.hpp"
#include "hafno/data/grid.hpp"
#include "hafno/data/navier_stokes.hpp"
#include "hafno/error.hpp"
#include "test_support.hpp"

using namespace hafno;
using namespace hafno::data;

namespace {

constexpr double kPi = std::numbers::pi;

double min_value(const Tensor& t) { return *std::min_element(t.data().begin(), t.data().end()); }

double sum_sq(const Tensor& t, std::size_t frame) {
    const std::size_t plane = t.dim(1) * t.dim(2);
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += t[frame * plane + i] * t[frame * plane + i];
    return s;
}

double frame_mean(const Tensor& t, std::size_t frame) {
    const std::size_t plane = t.dim(1) * t.dim(2);
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += t[frame * plane + i];
    return s / static_cast<double>(plane);
}

double rel_l2(const Tensor& a, const Tensor& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

/// Max nodal error of the FD solution for u = sin(pi x) sin(pi y) on n nodes.
double manufactured_error(std::size_t n) {
    GridField a{Tensor(Shape{1, n, n}, 1.0), 0.0, 1.0, false};
    GridField f = a;
    GridField exact = a;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double s = std::sin(kPi * a.coord(i)) * std::sin(kPi * a.coord(j));
            f.values.at(0, i, j) = 2 * kPi * kPi * s;
            exact.values.at(0, i, j) = s;
        }
    const auto sol = solve_elliptic_fd(a, f, 1e-13);
    return max_abs_diff(sol.u.values, exact.values);
}

// Independent FNV-1a 64 over a byte range.
std::uint64_t fnv_oracle(const std::vector<std::uint8_t>& b, std::size_t from) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = from; i < b.size(); ++i) {
        h ^= b[i];
        h *= 1099511628211ULL;
    }
    return h;
}

DatasetSpec small_trig_spec() {
    DatasetSpec s = preset_spec(Benchmark::trig, "tiny");
    s.resolution = 32;
    s.n_train = 3;
    s.n_test = 2;
    s.seed = 11;
    return s;
}

template <class F>
FormatErrorCode format_code(F&& f) {
    try {
        f();
    } catch (const FormatError& e) {
        return e.code();
    }
    FAIL("expected a FormatError");
    return FormatErrorCode::malformed;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("trigonometric coefficient") {
    SUBCASE("positive on the grid for 100 seeds") {
        double lowest = 1e300;
        for (std::uint64_t s = 0; s < 100; ++s) lowest = std::min(lowest, min_value(gen_trig_coefficient(s, 64).values));
        CHECK(lowest > 0.0);
    }
    SUBCASE("frequencies drawn from their dyadic ranges") {
        const auto c = draw_trig_coefficient(5);
        for (std::size_t k = 0; k < 6; ++k) {
            CHECK(c.a_k[k] >= std::ldexp(1.0, static_cast<int>(k)));
            CHECK(c.a_k[k] < 1.5 * std::ldexp(1.0, static_cast<int>(k)));
        }
    }
    SUBCASE("zero frequencies give the constant (3/2)^6") {
        TrigCoefficient c;
        c.a_k.fill(0.0);
        const auto a = eval_trig_coefficient(c, 16);
        for (double v : a.values.data()) CHECK(v == doctest::Approx(std::pow(1.5, 6)).epsilon(1e-15));
    }
    SUBCASE("deterministic and on [-1,1]") {
        const auto a = gen_trig_coefficient(3, 32);
        CHECK(a.values == gen_trig_coefficient(3, 32).values);
        CHECK(a.lo == -1.0);
        CHECK(a.hi == 1.0);
        CHECK_THROWS_AS(gen_trig_coefficient(3, 15), std::invalid_argument);
    }
}

TEST_CASE("GRF mode amplitudes follow (pi^2 (j^2+k^2) + c)^-1") {
    const GrfParams p{9.0, 32};
    const std::size_t draws = 2000, n = 64, m = 4;
    std::vector<double> sq(m * m, 0.0);
    for (std::size_t d = 0; d < draws; ++d) {
        const Tensor proj = project_cosine_basis(sample_grf(d, n, p), m);
        for (std::size_t i = 0; i < m * m; ++i) sq[i] += proj[i] * proj[i];
    }
    std::vector<std::pair<std::size_t, std::size_t>> modes;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k) modes.emplace_back(j, k);
    std::stable_sort(modes.begin(), modes.end(),
                     [](auto x, auto y) { return x.first * x.first + x.second * x.second < y.first * y.first + y.second * y.second; });
    for (std::size_t i = 0; i < 10; ++i) {
        const auto [j, k] = modes[i];
        const double empirical = std::sqrt(sq[j * m + k] / static_cast<double>(draws));
        CAPTURE(j);
        CAPTURE(k);
        CHECK(std::abs(empirical / grf_amplitude(j, k, p.c) - 1.0) < 0.05);
    }
}

TEST_CASE("projection recovers the drawn coefficients exactly") {
    const GrfParams p{9.0, 8};
    const Tensor xi = draw_grf_coefficients(4, p);
    const Tensor proj = project_cosine_basis(eval_grf(xi, p, 33), 8);
    for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t k = 0; k < 8; ++k) CHECK(proj[j * 8 + k] == doctest::Approx(grf_amplitude(j, k, 9.0) * xi[j * 8 + k]).epsilon(1e-10));
}

TEST_CASE("two-phase coefficient") {
    double area = 0.0;
    const std::size_t draws = 2000;
    for (std::size_t d = 0; d < draws; ++d) {
        const auto a = sample_grf_twophase(d, 32, 9.0, 3.0, 12.0);
        std::size_t hi = 0;
        for (double v : a.values.data()) {
            REQUIRE((v == 3.0 || v == 12.0));
            hi += v == 12.0;
        }
        area += static_cast<double>(hi) / static_cast<double>(a.values.size());
    }
    CHECK(std::abs(area / static_cast<double>(draws) - 0.5) < 0.02);
    CHECK_THROWS_AS(sample_grf_twophase(0, 32, 9.0, 12.0, 3.0), std::invalid_argument);
}

TEST_CASE("elliptic FD solver") {
    SUBCASE("second-order convergence on a manufactured solution") {
        const std::size_t sizes[] = {33, 65, 129, 257};
        double err[4];
        for (int i = 0; i < 4; ++i) err[i] = manufactured_error(sizes[i]);
        for (int i = 0; i < 3; ++i) {
            const double order = std::log2(err[i] / err[i + 1]);
            CAPTURE(order);
            CHECK(order >= 1.8);
            CHECK(order <= 2.2);
        }
        const double ratio = err[1] / err[2];
        CHECK(ratio >= 3.6);
        CHECK(ratio <= 4.4);
    }
    SUBCASE("discrete maximum principle for f = 1") {
        const auto a = sample_grf_twophase(2, 48, 9.0, 3.0, 12.0);
        const auto sol = solve_elliptic_fd(a, constant_like(a, 1.0));
        CHECK(sol.relative_residual < 1e-8);
        for (std::size_t i = 1; i + 1 < 48; ++i)
            for (std::size_t j = 1; j + 1 < 48; ++j) REQUIRE(sol.u.values.at(0, i, j) > 0.0);
        for (std::size_t i = 0; i < 48; ++i) CHECK(sol.u.values.at(0, 0, i) == 0.0);
    }
    SUBCASE("rejects bad coefficients and reports non-convergence") {
        GridField a{Tensor(Shape{1, 16, 16}, 1.0), 0.0, 1.0, false};
        a.values.at(0, 3, 3) = 0.0;
        CHECK_THROWS_AS(solve_elliptic_fd(a, constant_like(a, 1.0)), std::invalid_argument);
        a.values.at(0, 3, 3) = 1.0;
        try {
            solve_elliptic_fd(a, constant_like(a, 1.0), 1e-14, 2);
            FAIL("expected non-convergence");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::generation);
            CHECK(std::string(e.what()).find("residual") != std::string::npos);
        }
    }
}

// Known failure: the five-point stencil under-resolves the a_6 oscillation at 256
// nodes. Measured 2.6-4.4% over seeds 0-4, shrinking about 4x per refinement.
TEST_CASE("trigonometric solve at 256 nodes within 2% of a refined solve" * doctest::should_fail()) {
    const std::uint64_t seed = 9;
    const auto a_fine = gen_trig_coefficient(seed, 511);
    const auto fine = solve_elliptic_fd(a_fine, constant_like(a_fine, 1.0));
    const auto a = gen_trig_coefficient(seed, 256);
    const auto coarse = solve_elliptic_fd(a, constant_like(a, 1.0));
    const double rel = rel_l2(coarse.u.values, downsample_field(fine.u, 256).values);
    CAPTURE(rel);
    CHECK(rel < 0.02);
}

TEST_CASE("Navier-Stokes solver") {
    NSSpec spec;
    spec.resolution = 64;

    SUBCASE("single mode decays at the analytic viscous rate") {
        spec.frames = 1;
        spec.nu = 1e-2;
        Tensor w0(Shape{1, 64, 64});
        for (std::size_t i = 0; i < 64; ++i)
            for (std::size_t j = 0; j < 64; ++j) w0.at(0, i, j) = std::cos(2 * kPi * static_cast<double>(i) / 64.0);
        const Tensor w = solve_ns_vorticity(w0, Tensor(Shape{1, 64, 64}), spec);
        const double decay = std::exp(-spec.nu * 4 * kPi * kPi);
        double err = 0.0;
        for (std::size_t i = 0; i < w0.size(); ++i) err = std::max(err, std::abs(w[i] - decay * w0[i]));
        CHECK(err / decay < 1e-3);
    }
    SUBCASE("enstrophy decays without forcing") {
        spec.frames = 6;
        const Tensor w0 = sample_periodic_grf(1, 64);
        NSDiagnostics diag;
        const Tensor w = solve_ns_vorticity(w0, Tensor(Shape{1, 64, 64}), spec, &diag);
        double prev = sum_sq(w0, 0);
        for (std::size_t t = 0; t < spec.frames; ++t) {
            const double e = sum_sq(w, t);
            CHECK(e < prev);
            prev = e;
        }
        CHECK(diag.max_cfl <= spec.cfl);
        CHECK(diag.steps >= 6 * 128);
    }
    SUBCASE("mean vorticity conserved under zero-mean forcing") {
        spec.frames = 3;
        const Tensor w = solve_ns_vorticity(sample_periodic_grf(2, 64), ns_forcing(spec), spec);
        for (std::size_t t = 0; t < spec.frames; ++t) CHECK(std::abs(frame_mean(w, t)) < 1e-12);
        CHECK(std::abs(frame_mean(ns_forcing(spec), 0)) < 1e-14);
    }
    SUBCASE("velocity from the streamfunction is divergence free") {
        const Tensor w0 = sample_periodic_grf(3, 64);
        CHECK(spectral_divergence(velocity_from_vorticity(w0)) < 1e-10);
        CHECK(std::abs(frame_mean(w0, 0)) < 1e-14);
    }
    SUBCASE("deterministic and validated") {
        spec.frames = 1;
        const Tensor w0 = sample_periodic_grf(4, 64);
        CHECK(solve_ns_vorticity(w0, ns_forcing(spec), spec) == solve_ns_vorticity(w0, ns_forcing(spec), spec));
        NSSpec bad = spec;
        bad.nu = 0.0;
        CHECK_THROWS_AS(solve_ns_vorticity(w0, ns_forcing(spec), bad), std::invalid_argument);
        CHECK_THROWS_AS(solve_ns_vorticity(Tensor(Shape{1, 32, 32}), ns_forcing(spec), spec), std::invalid_argument);
    }
    SUBCASE("CFL floor aborts with a generation error") {
        spec.frames = 1;
        spec.dt_min = spec.dt_max;
        Tensor w0 = sample_periodic_grf(5, 64);
        for (double& v : w0.storage()) v *= 1e4;
        try {
            solve_ns_vorticity(w0, ns_forcing(spec), spec);
            FAIL("expected a CFL abort");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::generation);
            CHECK(std::string(e.what()).find("CFL") != std::string::npos);
        }
    }
}

TEST_CASE("downsample_field") {
    GridField x{Tensor(Shape{1, 512, 512}), 0.0, 1.0, false};
    for (std::size_t i = 0; i < 512; ++i)
        for (std::size_t j = 0; j < 512; ++j)
            x.values.at(0, i, j) = std::sin(2 * kPi * x.coord(i)) * std::cos(3 * kPi * x.coord(j)) + 2.0;

    CHECK(downsample_field(x, 512).values == x.values);
    const GridField c{Tensor(Shape{2, 64, 64}, 1.25), 0.0, 1.0, false};
    const GridField c20 = downsample_field(c, 20);
    for (double v : c20.values.data()) CHECK(v == doctest::Approx(1.25).epsilon(1e-15));

    const Tensor twice = downsample_field(downsample_field(x, 256), 128).values;
    const Tensor once = downsample_field(x, 128).values;
    CHECK(max_abs_diff(twice, once) / max_abs(once) < 1e-3);

    CHECK_THROWS_AS(downsample_field(downsample_field(x, 256), 300), std::invalid_argument);

    // Node-aligned targets are pure injection.

    GridField inj{Tensor(Shape{1, 127, 127}), -1.0, 1.0, false};
    Rng rng(3);
    for (double& v : inj.values.storage()) v = rng.uniform();
    const GridField sub = downsample_field(inj, 64);
    for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) REQUIRE(sub.values.at(0, i, j) == inj.values.at(0, 2 * i, 2 * j));
}

TEST_CASE("add_noise") {
    Rng rng(8);
    const Tensor u = hafno::test::random_tensor(Shape{1, 64, 64}, rng);
    CHECK(add_noise(u, 0.0, 1) == u);
    CHECK(add_noise(u, 0.1, 1) == add_noise(u, 0.1, 1));
    double ratio = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Tensor n = add_noise(u, 0.1, s);
        Tensor d = n;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= u[i];
        ratio += field_std(d) / field_std(u);
    }
    ratio /= 100.0;
    CHECK(ratio >= 0.095);
    CHECK(ratio <= 0.105);
    CHECK_THROWS_AS(add_noise(u, -0.1, 1), std::invalid_argument);
}

TEST_CASE("dataset generation and persistence") {
    const DatasetSpec spec = small_trig_spec();
    const auto splits = build_dataset(spec);
    REQUIRE(splits.train.samples.size() == 3);
    REQUIRE(splits.test.samples.size() == 2);
    CHECK(splits.train.samples[0].input.shape() == Shape{1, 32, 32});
    CHECK(splits.train.samples[0].target.shape() == Shape{1, 32, 32});
    CHECK(splits.test.manifest.at("split") == "test");

    SUBCASE("presets") {
        const auto tiny = preset_spec(Benchmark::trig, "tiny");
        CHECK(tiny.n_train == 64);
        CHECK(tiny.n_test == 16);
        CHECK(tiny.resolution == 64);
        CHECK(tiny.solve_resolution() == 127);
        const auto paper = preset_spec(Benchmark::trig, "paper");
        CHECK(paper.n_train == 1000);
        CHECK(paper.n_test == 100);
        CHECK_THROWS_AS(preset_spec(Benchmark::trig, "huge"), Error);
        DatasetSpec bad = tiny;
        bad.n_train = 0;
        CHECK_THROWS_AS(bad.validate(), Error);
    }
    SUBCASE("thread count does not change the output") {
        const auto threaded = build_dataset(spec, 3);
        CHECK(encode_dataset(threaded.train) == encode_dataset(splits.train));
        CHECK(encode_dataset(threaded.test) == encode_dataset(splits.test));
    }
    SUBCASE("regeneration from the manifest is bit-identical") {
        const auto bytes = encode_dataset(splits.test);
        const auto again = build_dataset(dataset_spec(decode_dataset(bytes)));
        CHECK(encode_dataset(again.test) == bytes);
    }
    SUBCASE("round trip through files") {
        const auto dir = std::filesystem::temp_directory_path() / "hafno_test_dataset";
        write_splits(splits, dir);
        const auto back = read_splits(dir);
        REQUIRE(back.train.samples.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back.train.samples[i].input == splits.train.samples[i].input);
            CHECK(back.train.samples[i].target == splits.train.samples[i].target);
        }
        CHECK(back.train.manifest.at("count") == "3");
        std::filesystem::remove_all(dir);
        try {
            read_dataset(dir / "train.hafd");
            FAIL("expected missing file");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::missing_file);
        }
    }
    SUBCASE("stored checksum matches an independent recompute") {
        const auto bytes = encode_dataset(splits.train);
        const std::size_t text_len = bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (static_cast<std::size_t>(bytes[9]) << 24);
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv_oracle(bytes, 10 + text_len)));
        CHECK(decode_dataset(bytes).manifest.at("checksum") == hex);
    }
    SUBCASE("corruption is classified") {
        auto bytes = encode_dataset(splits.train);
        auto magic = bytes;
        magic[0] = 'X';
        CHECK(format_code([&] { decode_dataset(magic); }) == FormatErrorCode::bad_magic);
        auto version = bytes;
        version[4] = 9;
        CHECK(format_code([&] { decode_dataset(version); }) == FormatErrorCode::version_mismatch);
        auto truncated = bytes;
        truncated.resize(bytes.size() - 5);
        CHECK(format_code([&] { decode_dataset(truncated); }) == FormatErrorCode::truncated);
        auto flipped = bytes;
        flipped[bytes.size() - 3] ^= 0x10;
        CHECK(format_code([&] { decode_dataset(flipped); }) == FormatErrorCode::checksum_mismatch);
    }
    SUBCASE("solution solves the refined problem at the sample nodes") {
        const auto& s = splits.train.samples[0];
        const auto a = gen_trig_coefficient(sample_seed(spec.seed, 0), spec.solve_resolution());
        const auto u = solve_elliptic_fd(a, constant_like(a, 1.0));
        CHECK(s.target == downsample_field(u.u, 32).values);
        CHECK(s.input == gen_trig_coefficient(sample_seed(spec.seed, 0), 32).values);
    }
    SUBCASE("inverse direction swaps and noises") {
        DatasetSpec inv = spec;
        inv.inverse = true;
        inv.noise_eps = 0.1;
        const auto swapped = build_dataset(inv);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& fwd = splits.train.samples[i];
            const auto& bwd = swapped.train.samples[i];
            CHECK(bwd.target == fwd.input);
            CHECK(bwd.input != fwd.target);
            CHECK(max_abs_diff(bwd.input, fwd.target) < 1.0 * max_abs(fwd.target));
        }
        inv.noise_eps = 0.0;
        CHECK(build_dataset(inv).train.samples[1].input == splits.train.samples[1].target);
    }
}

TEST_CASE("NS dataset and teacher-forcing windows") {
    DatasetSpec spec = preset_spec(Benchmark::ns, "tiny");
    spec.resolution = 32;
    spec.frames = 13;
    spec.n_train = 2;
    spec.n_test = 1;
    const auto splits = build_dataset(spec);
    const auto& s = splits.train.samples[1];
    CHECK(s.input.shape() == Shape{10, 32, 32});
    CHECK(s.target.shape() == Shape{3, 32, 32});

    const Dataset win = trajectory_windows(splits.train);
    REQUIRE(win.samples.size() == 2 * 3);
    CHECK(win.samples[3].input.shape() == Shape{10, 32, 32});
    CHECK(win.samples[3].target.shape() == Shape{1, 32, 32});
    // Window 1 of sample 1: frames 2..11 -> frame 12.
    for (std::size_t i = 0; i < 32 * 32; ++i) {
        REQUIRE(win.samples[4].input[i] == s.input[32 * 32 + i]);
        REQUIRE(win.samples[4].input[9 * 32 * 32 + i] == s.target[i]);
        REQUIRE(win.samples[4].target[i] == s.target[32 * 32 + i]);
    }
    CHECK_THROWS_AS(trajectory_windows(build_dataset(small_trig_spec()).train), Error);
}

}  // TEST_SUITE
