#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "hafno/spectral/spectral.hpp"
#include "test_support.hpp"

using namespace hafno;
using namespace hafno::spectral;
using hafno::test::gradcheck;
using hafno::test::random_tensor;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct O(N^2) DFT of one channel at (k1, k2); the independent oracle.
cplx direct_dft(const Tensor& x, std::size_t c, std::size_t k1, std::size_t k2) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    cplx acc = 0.0;
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) {
            const double a = -2 * kPi * (static_cast<double>(k1 * h) / H + static_cast<double>(k2 * w) / W);
            acc += x.at(c, h, w) * cplx(std::cos(a), std::sin(a));
        }
    return acc;
}

cplx coeff(const Tensor& s, std::size_t c, std::size_t r, std::size_t col) {
    const std::size_t R = s.dim(1), Wh = s.dim(2);
    const std::size_t base = ((c * R + r) * Wh + col) * 2;
    return {s[base], s[base + 1]};
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("rfft2 agrees with the direct DFT") {
    Rng rng(11);
    Tensor x = random_tensor({2, 8, 16}, rng);
    Tensor s = rfft2(x);
    CHECK(s.shape() == Shape{2, 8, 9, 2});
    double err = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < 8; ++r)
            for (std::size_t k = 0; k < 9; ++k) err = std::max(err, std::abs(coeff(s, c, r, k) - direct_dft(x, c, r, k)));
    CHECK(err < 1e-12);
}

TEST_CASE("constant field has only a DC coefficient") {
    Tensor x(Shape{1, 8, 8}, 1.25);
    Tensor s = rfft2(x);
    CHECK(coeff(s, 0, 0, 0).real() == doctest::Approx(1.25 * 64));
    double rest = 0.0;
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t k = 0; k < 5; ++k)
            if (r || k) rest = std::max(rest, std::abs(coeff(s, 0, r, k)));
    CHECK(rest < 1e-12);
}

TEST_CASE("single harmonic along the columns lands on mode (0,3)") {
    const std::size_t H = 8, W = 16;
    Tensor x(Shape{1, H, W});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) x.at(0, h, w) = std::cos(2 * kPi * 3 * static_cast<double>(w) / W);
    Tensor s = rfft2(x);
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t k = 0; k < W / 2 + 1; ++k) {
            const double mag = std::abs(coeff(s, 0, r, k));
            if (r == 0 && k == 3) CHECK(mag == doctest::Approx(H * W / 2.0));
            else CHECK(mag < 1e-10);
        }
}

TEST_CASE("round trip, Parseval, linearity and shift theorem on several sizes") {
    Rng rng(12);
    for (std::size_t n : {16u, 64u, 128u}) {
        CAPTURE(n);
        Tensor x = random_tensor({2, n, n}, rng), y = random_tensor({2, n, n}, rng);
        Tensor sx = rfft2(x);
        CHECK(max_abs_diff(irfft2(sx, n, n), x) < 1e-10);

        double space = 0.0, freq = 0.0;
        for (double v : x.data()) space += v * v;
        auto z = as_complex(sx.data());
        const std::size_t Wh = n / 2 + 1;
        for (std::size_t i = 0; i < z.size(); ++i) freq += column_weight(i % Wh, n) * std::norm(z[i]);
        CHECK(std::abs(space - freq / static_cast<double>(n * n)) / space < 1e-12);

        Tensor comb(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) comb[i] = 2.0 * x[i] - 0.5 * y[i];
        Tensor sc = rfft2(comb), sy = rfft2(y);
        double lin = 0.0;
        for (std::size_t i = 0; i < sc.size(); ++i) lin = std::max(lin, std::abs(sc[i] - (2.0 * sx[i] - 0.5 * sy[i])));
        CHECK(lin < 1e-9);

        const long s1 = 3, s2 = -5;
        Tensor ss = rfft2(cyclic_shift(x, s1, s2));
        double shift_err = 0.0, scale = 0.0;
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t k = 0; k < Wh; ++k) {
                    const double a = -2 * kPi * (static_cast<double>(r) * s1 + static_cast<double>(k) * s2) / n;
                    const cplx expect = cplx(std::cos(a), std::sin(a)) * coeff(sx, c, r, k);
                    shift_err = std::max(shift_err, std::abs(coeff(ss, c, r, k) - expect));
                    scale = std::max(scale, std::abs(expect));
                }
        CHECK(shift_err / scale < 1e-12);
    }
}

TEST_CASE("irfft2 of a conjugate pair at mode (1,0) is a cosine") {
    const std::size_t H = 8, W = 8;
    Tensor s(Shape{1, H, W / 2 + 1, 2});
    const double amp = H * W / 2.0;
    s[((0 * H + 1) * (W / 2 + 1) + 0) * 2] = amp;
    s[((0 * H + (H - 1)) * (W / 2 + 1) + 0) * 2] = amp;
    Tensor x = irfft2(s, H, W);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w) CHECK(x.at(0, h, w) == doctest::Approx(std::cos(2 * kPi * h / H)));
    CHECK(max_abs(irfft2(Tensor(s.shape()), H, W)) == 0.0);
    CHECK_THROWS_AS(irfft2(s, H, 16), std::invalid_argument);
}

TEST_CASE("truncate_modes and pad_modes") {
    Rng rng(13);
    const std::size_t H = 16, W = 16;
    SUBCASE("DC survives any cut") {
        Tensor x(Shape{1, H, W}, 0.5);
        for (auto [m1, m2] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 2}, {8, 9}}) {
            Tensor back = inverse(pad_modes(truncate_modes(forward(x), m1, m2)));
            CHECK(max_abs_diff(back, x) < 1e-14);
        }
    }
    SUBCASE("a harmonic just above the cut vanishes") {
        const std::size_t m1 = 3;
        Tensor x(Shape{1, H, W});
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) x.at(0, h, w) = std::sin(2 * kPi * (m1 + 1) * h / H);
        CHECK(max_abs(truncate_modes(forward(x), m1, 4).coeffs) < 1e-12);
    }
    SUBCASE("compact layout keeps both row signs") {
        Spectrum s = forward(random_tensor({1, H, W}, rng));
        Spectrum t = truncate_modes(s, 3, 4);
        CHECK(t.coeffs.shape() == Shape{1, 6, 4, 2});
        CHECK(coeff(t.coeffs, 0, 4, 2) == coeff(s.coeffs, 0, H - 2, 2));
        CHECK(coeff(t.coeffs, 0, 1, 3) == coeff(s.coeffs, 0, 1, 3));
    }
    SUBCASE("cuts beyond Nyquist are rejected") {
        Spectrum s = forward(random_tensor({1, H, W}, rng));
        CHECK_THROWS_AS(truncate_modes(s, 9, 2), std::invalid_argument);
        CHECK_THROWS_AS(truncate_modes(s, 2, 10), std::invalid_argument);
    }
    SUBCASE("default level-1 cut fits a 64 grid") { CHECK_NOTHROW(check_mode_cut(64, 64, 24, 24)); }
}

TEST_CASE("spectral_multiply") {
    Rng rng(14);
    Spectrum s = truncate_modes(forward(random_tensor({3, 16, 16}, rng)), 4, 4);
    CHECK(spectral_multiply(s, identity_spectral_kernel(4, 4, 3)).coeffs == s.coeffs);
    SpectralKernel zero{leaf(Tensor(spectral_weight_shape(4, 4, 3, 2))), leaf(Tensor(spectral_weight_shape(4, 4, 3, 2))),
                        4, 4, 3, 2};
    CHECK(max_abs(spectral_multiply(s, zero).coeffs) == 0.0);

    SUBCASE("per-mode complex matrix product") {
        SpectralKernel R = make_spectral_kernel(4, 4, 3, 2, rng);
        Tensor out = spectral_multiply(s, R).coeffs;
        const std::size_t q = 5, k = 2, o = 1;
        cplx expect = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t widx = ((q * 4 + k) * 3 + i) * 2 + o;
            expect += cplx(R.re->value[widx], R.im->value[widx]) * coeff(s.coeffs, i, q, k);
        }
        CHECK(std::abs(coeff(out, o, q, k) - expect) < 1e-14);
    }
    SUBCASE("mismatches are rejected") {
        SpectralKernel R = make_spectral_kernel(4, 4, 2, 2, rng);
        CHECK_THROWS_AS(spectral_multiply(s, R), std::invalid_argument);
        SpectralKernel R2 = make_spectral_kernel(3, 4, 3, 2, rng);
        CHECK_THROWS_AS(spectral_multiply(s, R2), std::invalid_argument);
    }
    SUBCASE("initialisation range") {
        SpectralKernel R = make_spectral_kernel(4, 4, 3, 2, rng);
        const double bound = 1.0 / (3.0 * 2.0 * std::sqrt(16.0));
        CHECK(max_abs(R.re->value) <= bound);
        CHECK(max_abs(R.im->value) <= bound);
        CHECK(max_abs(R.re->value) > 0.5 * bound);
    }
}

TEST_CASE("fourier_unit") {
    Rng rng(15);
    const std::size_t H = 16, W = 16, m = 4;
    SpectralKernel R = make_spectral_kernel(m, m, 2, 3, rng);
    Tensor v = random_tensor({2, H, W}, rng);

    SUBCASE("output is band-limited to the kept modes") {
        Tensor out = fourier_unit(leaf(v), R)->value;
        Tensor s = rfft2(out);
        auto mask = kept_mode_mask(H, W, m, m);
        double outside = 0.0, total = 0.0;
        auto z = as_complex(s.data());
        const std::size_t Wh = W / 2 + 1;
        for (std::size_t i = 0; i < z.size(); ++i) {
            total += std::norm(z[i]);
            if (!mask[i % (H * Wh)]) outside = std::max(outside, std::abs(z[i]));
        }
        CHECK(outside < 1e-10);
        CHECK(total > 0.0);
    }
    SUBCASE("energy above the cut gives zero output") {
        Tensor hi(Shape{2, H, W});
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) hi.at(c, h, w) = std::cos(2 * kPi * 6 * (h + 2.0 * w) / H);
        CHECK(max_abs(fourier_unit(leaf(hi), R)->value) < 1e-12);
    }
    SUBCASE("identity kernel passes band-limited input") {
        Tensor low = inverse(pad_modes(truncate_modes(forward(v), m - 1, m - 1)));
        CHECK(max_abs_diff(fourier_unit(leaf(low), identity_spectral_kernel(m, m, 2))->value, low) < 1e-12);
    }
    SUBCASE("commutes with cyclic shifts") {
        for (auto [a, b] : {std::pair{1L, 0L}, {5L, -3L}}) {
            Tensor lhs = fourier_unit(leaf(cyclic_shift(v, a, b)), R)->value;
            Tensor rhs = cyclic_shift(fourier_unit(leaf(v), R)->value, a, b);
            CHECK(max_abs_diff(lhs, rhs) < 1e-10);
        }
    }
    SUBCASE("gradcheck through the full chain w.r.t. input and weights") {
        SpectralKernel Rs = make_spectral_kernel(3, 3, 2, 2, rng);
        auto f = [&](const std::vector<Var>& p) {
            SpectralKernel k{p[1], p[2], 3, 3, 2, 2};
            return fourier_unit(p[0], k);
        };
        auto r = gradcheck(f, {leaf(random_tensor({2, 8, 8}, rng)), Rs.re, Rs.im});
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("stage nodes pass gradcheck individually") {
        Tensor x = random_tensor({2, 8, 8}, rng);
        auto r1 = gradcheck([](auto& p) { return rfft2_node(p[0]); }, {leaf(x)});
        CHECK(r1.max_rel_error < 1e-4);
        auto r2 = gradcheck([](auto& p) { return irfft2_node(p[0], 8, 8); }, {leaf(rfft2(x))});
        CHECK(r2.max_rel_error < 1e-4);
        auto r3 = gradcheck([](auto& p) { return pad_node(truncate_node(p[0], 2, 3), 8, 8); }, {leaf(rfft2(x))});
        CHECK(r3.max_rel_error < 1e-4);
    }
}

TEST_CASE("rotation and flips permute the spectrum") {
    Rng rng(16);
    const std::size_t n = 16, Wh = n / 2 + 1;
    Tensor x = random_tensor({1, n, n}, rng);
    // Group actions about the origin of the torus: index maps (h,w) -> g(h,w).
    Tensor rot(x.shape()), flip_h(x.shape()), flip_w(x.shape());
    for (std::size_t h = 0; h < n; ++h)
        for (std::size_t w = 0; w < n; ++w) {
            rot.at(0, w, (n - h) % n) = x.at(0, h, w);
            flip_h.at(0, (n - h) % n, w) = x.at(0, h, w);
            flip_w.at(0, h, (n - w) % n) = x.at(0, h, w);
        }
    Tensor s = rfft2(x);
    auto full = [&](long k1, long k2) {
        const std::size_t a = static_cast<std::size_t>((k1 % static_cast<long>(n) + n) % n);
        const std::size_t b = static_cast<std::size_t>((k2 % static_cast<long>(n) + n) % n);
        if (b < Wh) return coeff(s, 0, a, b);
        return std::conj(coeff(s, 0, (n - a) % n, n - b));
    };
    Tensor sr = rfft2(rot), sh = rfft2(flip_h), sw = rfft2(flip_w);
    double err = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < Wh; ++b) {
            const long k1 = static_cast<long>(a), k2 = static_cast<long>(b);
            err = std::max(err, std::abs(coeff(sr, 0, a, b) - full(-k2, k1)));
            err = std::max(err, std::abs(coeff(sh, 0, a, b) - full(-k1, k2)));
            err = std::max(err, std::abs(coeff(sw, 0, a, b) - std::conj(full(-k1, k2))));
        }
    CHECK(err < 1e-10);
}

}  // TEST_SUITE
