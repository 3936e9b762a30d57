#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "hafno/diagnostics/diagnostics.hpp"
#include "hafno/diagnostics/gradcheck.hpp"
#include "hafno/layers/layers.hpp"
#include "test_support.hpp"

using namespace hafno;
using namespace hafno::diagnostics;
using hafno::test::random_tensor;

namespace {

using cplx = std::complex<double>;

// Naive DFT of one channel, X[k1][k2] = sum x[i][j] exp(-2 pi i (k1 i / H + k2 j / W)).
std::vector<cplx> naive_dft(const Tensor& x, std::size_t c) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    std::vector<cplx> out(H * W);
    for (std::size_t k1 = 0; k1 < H; ++k1) {
        for (std::size_t k2 = 0; k2 < W; ++k2) {
            cplx s = 0.0;
            for (std::size_t i = 0; i < H; ++i) {
                for (std::size_t j = 0; j < W; ++j) {
                    const double ph = -2.0 * std::numbers::pi * (double(k1 * i) / H + double(k2 * j) / W);
                    s += x.at(c, i, j) * cplx(std::cos(ph), std::sin(ph));
                }
            }
            out[k1 * W + k2] = s;
        }
    }
    return out;
}

Tensor harmonic(std::size_t n, long k1, long k2) {
    Tensor t(Shape{1, n, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            t.at(0, i, j) = std::cos(2.0 * std::numbers::pi * double(k1 * long(i) + k2 * long(j)) / double(n));
        }
    }
    return t;
}

layers::AttentionParams random_attention(std::size_t C, Rng& rng) {
    return {leaf(random_tensor({C / 2, C}, rng)), leaf(random_tensor({C / 2}, rng)), leaf(random_tensor({C, C / 2}, rng)),
            leaf(random_tensor({C}, rng)), leaf(random_tensor({1, 2, 7, 7}, rng, -0.3, 0.3))};
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("identical fields give zero error in every band") {
    Rng rng(1);
    const Tensor x = random_tensor({2, 16, 16}, rng);
    const auto r = spectral_error_map(x, x);
    REQUIRE(r.n_bands() == kDefaultBands);
    for (double b : r.band_relative) CHECK(b == 0.0);
    CHECK(max_abs(r.error_map) == 0.0);
    CHECK(r.error_map.shape() == Shape{16, 9});
}

TEST_CASE("a harmonic past the last band boundary lands in the top band only") {
    Rng rng(2);
    const std::size_t n = 32;
    const Tensor truth = random_tensor({1, n, n}, rng);
    for (auto [k1, k2] : std::vector<std::pair<long, long>>{{15, 0}, {-14, 3}, {16, 0}, {11, 11}}) {
        CAPTURE(k1);
        CAPTURE(k2);
        Tensor pred = truth;
        const Tensor h = harmonic(n, k1, k2);
        for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += 0.1 * h[i];
        const auto r = spectral_error_map(pred, truth);
        for (std::size_t b = 0; b + 1 < r.n_bands(); ++b) CHECK(r.band_error_energy[b] < 1e-20);
        CHECK(r.band_error_energy.back() > 1.0);
    }
}

TEST_CASE("band assignment: integer radius, Nyquist row in the top band") {
    CHECK(band_of(0, 0, 32, 32, 8) == 0);
    CHECK(band_of(1, 1, 32, 32, 8) == 0);  // radius floor(sqrt 2) = 1
    CHECK(band_of(2, 0, 32, 32, 8) == 1);
    CHECK(band_of(0, 13, 32, 32, 8) == 6);
    CHECK(band_of(-16, 0, 32, 32, 8) == 7);
    CHECK(band_of(-16, 16, 32, 32, 8) == 7);
    CHECK(band_of(0, 8, 16, 32, 8) == 7);  // the shorter side sets the Nyquist radius
}

TEST_CASE("band energies partition the total error energy") {
    Rng rng(3);
    for (int draw = 0; draw < 20; ++draw) {
        const std::size_t H = 8u << (draw % 3), W = 8u << ((draw + 1) % 3);
        const Tensor a = random_tensor({2, H, W}, rng), b = random_tensor({2, H, W}, rng);
        const auto r = spectral_error_map(a, b, 1 + draw % 8);
        double direct = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) direct += (a[i] - b[i]) * (a[i] - b[i]);
        direct *= double(H * W);
        CHECK(std::abs(r.total_error_energy() - direct) / direct < 1e-12);
        for (double e : r.band_error_energy) CHECK(e >= 0.0);
    }
}

TEST_CASE("error map and shifted view match a naive DFT") {
    Rng rng(4);
    const std::size_t H = 8, W = 4;
    const Tensor a = random_tensor({1, H, W}, rng), b = random_tensor({1, H, W}, rng);
    Tensor d = a;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
    const auto X = naive_dft(d, 0);
    const auto r = spectral_error_map(a, b);
    REQUIRE(r.shifted_view.shape() == Shape{H, W});
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
            CHECK(std::abs(r.shifted_view[h * W + w] - std::abs(X[h * W + w])) < 1e-12);
            if (w <= W / 2) CHECK(std::abs(r.error_map[h * (W / 2 + 1) + w] - std::abs(X[h * W + w])) < 1e-12);
        }
    }
}

TEST_CASE("shifted view puts the highest frequency at the centre") {
    const std::size_t n = 16;
    const auto r = spectral_error_map(harmonic(n, 8, 8), Tensor(Shape{1, n, n}));
    CHECK(r.shifted_view[(n / 2) * n + n / 2] > 100.0);
    CHECK(r.shifted_view[0] < 1e-12);
}

TEST_CASE("aggregate sums band energies") {
    Rng rng(5);
    std::vector<SpectralErrorReport> rs;
    double err = 0.0, truth = 0.0;
    for (int i = 0; i < 3; ++i) {
        rs.push_back(spectral_error_map(random_tensor({1, 16, 16}, rng), random_tensor({1, 16, 16}, rng), 4));
        err += rs.back().band_error_energy[3];
        truth += rs.back().band_truth_energy[3];
    }
    const auto agg = aggregate_reports(rs);
    CHECK(agg.band_error_energy[3] == doctest::Approx(err).epsilon(1e-14));
    CHECK(agg.band_relative[3] == doctest::Approx(std::sqrt(err / truth)).epsilon(1e-14));
    CHECK_THROWS(aggregate_reports({}));
}

TEST_CASE("top-half relative error combines the upper bands") {
    Rng rng(6);
    const auto r = spectral_error_map(random_tensor({1, 16, 16}, rng), random_tensor({1, 16, 16}, rng), 4);
    const double e = r.band_error_energy[2] + r.band_error_energy[3];
    const double t = r.band_truth_energy[2] + r.band_truth_energy[3];
    CHECK(r.top_half_relative() == doctest::Approx(std::sqrt(e / t)).epsilon(1e-14));
}

TEST_CASE("shape disagreement is rejected") {
    CHECK_THROWS_AS(spectral_error_map(Tensor(Shape{1, 8, 8}), Tensor(Shape{1, 8, 4})), std::invalid_argument);
}

TEST_CASE("group actions against a naive DFT index map") {
    Rng rng(7);
    const std::size_t n = 8;
    const Tensor x = random_tensor({1, n, n}, rng);
    const auto X = naive_dft(x, 0);
    auto at = [&](long k1, long k2) {
        const auto w = [&](long k) { return std::size_t(((k % long(n)) + long(n)) % long(n)); };
        return X[w(k1) * n + w(k2)];
    };
    for (GroupElement g : {GroupElement::rot90, GroupElement::flip_x, GroupElement::flip_y}) {
        CAPTURE(to_string(g));
        const auto Y = naive_dft(apply_group(g, x), 0);
        for (long k1 = 0; k1 < long(n); ++k1) {
            for (long k2 = 0; k2 < long(n); ++k2) {
                cplx expect = g == GroupElement::rot90 ? at(k2, -k1) : g == GroupElement::flip_x ? at(k1, -k2) : at(-k1, k2);
                CHECK(std::abs(Y[k1 * n + k2] - expect) < 1e-10);
            }
        }
        CHECK(check_fourier_group_commutation(x, g) < 1e-10);
    }
}

TEST_CASE("Fourier transform commutes with the lattice group") {
    Rng rng(8);
    CHECK(check_fourier_group_commutation(Tensor(Shape{1, 16, 16}, 2.5), GroupElement::rot90) == 0.0);
    for (int draw = 0; draw < 20; ++draw) {
        const auto g = static_cast<GroupElement>(draw % 3);
        CHECK(check_fourier_group_commutation(random_tensor({2, 32, 32}, rng), g) < 1e-10);
    }
    CHECK(check_fourier_group_commutation(random_tensor({1, 16, 8}, rng), GroupElement::flip_x) < 1e-10);
    CHECK(check_fourier_group_commutation(random_tensor({1, 16, 8}, rng), GroupElement::flip_y) < 1e-10);
    CHECK_THROWS_AS(check_fourier_group_commutation(random_tensor({1, 16, 8}, rng), GroupElement::rot90),
                    std::invalid_argument);
}

TEST_CASE("four quarter turns are the identity") {
    Rng rng(9);
    const Tensor x = random_tensor({1, 8, 8}, rng);
    Tensor y = x;
    for (int i = 0; i < 4; ++i) y = apply_group(GroupElement::rot90, y);
    CHECK(y == x);
    CHECK(apply_group(GroupElement::rot90, x) != x);
}

TEST_CASE("shift equivariance of the attention block and the Fourier layer") {
    Rng rng(10);
    const std::size_t C = 4, n = 16;
    const auto att = random_attention(C, rng);
    layers::ConvResFourierParams crf;
    crf.R = spectral::make_spectral_kernel(4, 4, C, C, rng);
    crf.weight = leaf(random_tensor({C, C, 3, 3}, rng, -0.3, 0.3));
    crf.bias = leaf(random_tensor({C}, rng, -0.1, 0.1));
    const FieldOp attention = [&](const Tensor& a) { return layers::attention_block(constant(a), att)->value; };
    const FieldOp fourier = [&](const Tensor& v) { return layers::conv_res_fourier(constant(v), crf)->value; };
    for (int draw = 0; draw < 20; ++draw) {
        const long sh = long(rng.uniform(-20, 20)), sw = long(rng.uniform(-20, 20));
        const Tensor x = random_tensor({C, n, n}, rng);
        CHECK(check_shift_equivariance(attention, x, sh, sw).max_abs < 1e-11);
        CHECK(check_shift_equivariance(fourier, x, sh, sw).max_abs < 1e-10);
    }
}

TEST_CASE("shift check detects position dependence") {
    Rng rng(11);
    const FieldOp ramp = [](const Tensor& x) {
        Tensor y = x;
        for (std::size_t i = 0; i < y.dim(1); ++i) y.at(0, i, 0) += double(i);
        return y;
    };
    const auto d = check_shift_equivariance(ramp, random_tensor({1, 8, 8}, rng), 1, 0);
    CHECK(d.max_abs > 0.5);
    CHECK(d.relative > 0.0);
}

TEST_CASE("model equivariance report passes on the tiny configuration") {
    model::HierarchicalModel m(model::tiny_config(), 3);
    const auto entries = model_equivariance_report(m, 64, 17, 2);
    REQUIRE(entries.size() == m.config().num_scales() + 1);
    for (const auto& e : entries) {
        CAPTURE(e.name);
        CAPTURE(e.deviation.max_abs);
        CHECK(e.passed());
    }
    CHECK(entries.back().name.find("mod 8") != std::string::npos);
    const std::string text = equivariance_text(entries);
    CHECK(text.rfind("check,max_abs,relative,tolerance,kind,passed\n", 0) == 0);
}

TEST_CASE("gradcheck suite") {
    const auto entries = gradcheck_suite();
    CHECK(entries.size() >= 30);
    for (const auto& e : entries) {
        CAPTURE(e.op);
        CAPTURE(e.result.max_rel_error);
        CHECK(e.passed());
        CHECK(e.result.max_rel_error < 1e-4);
        if (e.linear) CHECK(e.result.max_rel_error < 1e-10);
        CHECK(e.result.checked > 0);
    }
    CHECK(describe_failures(entries).empty());
}

TEST_CASE("gradcheck flags a wrong backward rule") {
    // Forward doubles, backward claims the identity.
    auto wrong = [](const std::vector<Var>& p) {
        Tensor v = p[0]->value;
        for (double& x : v.storage()) x *= 2.0;
        Var in = p[0];
        return make_result(std::move(v), {in}, "wrong", [in](Node& self) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad_buffer()[i] += self.grad[i];
        });
    };
    Rng rng(12);
    GradcheckEntry e{"wrong", true, 1e-10, gradcheck(wrong, {leaf(random_tensor({5}, rng))}, 7, 5, 1.0)};
    CHECK(e.result.max_rel_error == doctest::Approx(0.5));
    CHECK_FALSE(e.passed());
    const std::string msg = describe_failures({e});
    CHECK(msg.find("wrong") != std::string::npos);
    CHECK(msg.find("analytic") != std::string::npos);
    CHECK(msg.find("numeric") != std::string::npos);
}

TEST_CASE("report writers") {
    Rng rng(13);
    const auto r = spectral_error_map(random_tensor({1, 4, 4}, rng), random_tensor({1, 4, 4}, rng), 2);
    const std::string map = error_map_csv(r);
    CHECK(map.rfind("mode_row,mode_col,error_mag\n", 0) == 0);
    CHECK(std::count(map.begin(), map.end(), '\n') == 1 + 4 * 3);
    CHECK(map.find("\n-2,0,") != std::string::npos);
    const std::string bands = band_csv(r);
    CHECK(bands.rfind("band,rel_error\n0,", 0) == 0);
    CHECK(std::count(bands.begin(), bands.end(), '\n') == 3);

    Tensor img(Shape{2, 3});
    img[4] = 10.0;
    const std::string pgm = pgm16(img);
    const std::string header = "P5\n3 2\n65535\n";
    REQUIRE(pgm.size() == header.size() + 12);
    CHECK(pgm.substr(0, header.size()) == header);
    CHECK(static_cast<unsigned char>(pgm[header.size() + 8]) == 0xff);
    CHECK(static_cast<unsigned char>(pgm[header.size() + 9]) == 0xff);
    CHECK(pgm[header.size()] == 0);
    CHECK_THROWS(pgm16(Tensor(Shape{2, 2, 2})));
}

}  // TEST_SUITE
