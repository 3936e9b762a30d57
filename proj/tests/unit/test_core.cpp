#include <cmath>

#include "doctest.h"
#include "hafno/error.hpp"
#include "hafno/util/io.hpp"
#include "test_support.hpp"

using namespace hafno;
using namespace hafno::ops;
using hafno::test::gradcheck;
using hafno::test::random_tensor;

TEST_SUITE("core") {

TEST_CASE("tensor rejects length mismatch and reports shapes") {
    CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<double>(5)), std::invalid_argument);
    Tensor t(Shape{2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(shape_str(t.shape()) == "[2, 3]");
}

TEST_CASE("elementwise scalar identities") {
    CHECK(gelu(leaf(Tensor::scalar(0.0)))->value.item() == 0.0);
    CHECK(sigmoid(leaf(Tensor::scalar(0.0)))->value.item() == 0.5);
    CHECK_THROWS_WITH_AS(add(leaf(Tensor(Shape{2})), leaf(Tensor(Shape{3}))), doctest::Contains("[2]"),
                         std::invalid_argument);
}

TEST_CASE("gelu derivative at 1 matches central difference") {
    auto g = [](double x) {
        return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
    };
    const double h = 1e-5;
    const double numeric = (g(1.0 + h) - g(1.0 - h)) / (2 * h);
    Var x = leaf(Tensor::scalar(1.0));
    backward(gelu(x));
    CHECK(std::abs(x->grad.item() - numeric) / std::abs(numeric) < 1e-6);
    CHECK(gelu(leaf(Tensor::scalar(1.0)))->value.item() == doctest::Approx(g(1.0)).epsilon(1e-15));
}

TEST_CASE("non-finite forward values are rejected") {
    Var x = leaf(Tensor::scalar(1e308));
    CHECK_THROWS_AS(scale(x, 10.0), std::domain_error);
}

TEST_CASE("pointwise_linear") {
    Rng rng(1);
    Tensor x = random_tensor({3, 4, 5}, rng);
    Tensor eye(Shape{3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    CHECK(pointwise_linear(leaf(x), leaf(eye), leaf(Tensor(Shape{3})))->value == x);

    Tensor c(Shape{3, 4, 5}, 0.7);
    Tensor out = pointwise_linear(leaf(c), leaf(random_tensor({2, 3}, rng)), leaf(random_tensor({2}, rng)))->value;
    for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t i = 0; i < 20; ++i) CHECK(out[ch * 20 + i] == out[ch * 20]);

    CHECK_THROWS_AS(pointwise_linear(leaf(x), leaf(Tensor(Shape{2, 4})), nullptr), std::invalid_argument);

    auto r = gradcheck([](const std::vector<Var>& v) { return pointwise_linear(v[0], v[1], v[2]); },
                       {leaf(x), leaf(random_tensor({2, 3}, rng)), leaf(random_tensor({2}, rng))});
    CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("conv2d_circular") {
    Rng rng(2);
    Tensor x = random_tensor({2, 8, 8}, rng);
    Tensor w1 = random_tensor({3, 2}, rng), b = random_tensor({3}, rng);
    SUBCASE("1x1 kernel equals pointwise_linear") {
        Tensor k1(Shape{3, 2, 1, 1}, std::vector<double>(w1.data().begin(), w1.data().end()));
        CHECK(max_abs_diff(conv2d_circular(leaf(x), leaf(k1), leaf(b))->value,
                           pointwise_linear(leaf(x), leaf(w1), leaf(b))->value) < 1e-15);
    }
    SUBCASE("delta kernel is the identity") {
        Tensor one = random_tensor({1, 8, 8}, rng);
        Tensor delta(Shape{1, 1, 3, 3});
        delta[4] = 1.0;
        CHECK(conv2d_circular(leaf(one), leaf(delta), nullptr)->value == one);
    }
    SUBCASE("kernel convention against a direct periodic sum") {
        Tensor k = random_tensor({1, 2, 3, 3}, rng);
        Tensor out = conv2d_circular(leaf(x), leaf(k), nullptr)->value;
        double expect = 0.0;
        const std::size_t h = 0, w = 7;
        for (std::size_t c = 0; c < 2; ++c)
            for (long i = -1; i <= 1; ++i)
                for (long j = -1; j <= 1; ++j)
                    expect += k[(c * 3 + static_cast<std::size_t>(i + 1)) * 3 + static_cast<std::size_t>(j + 1)] *
                              x.at(c, static_cast<std::size_t>((8 + static_cast<long>(h) + i) % 8),
                                   static_cast<std::size_t>((8 + static_cast<long>(w) + j) % 8));
        CHECK(out.at(0, h, w) == doctest::Approx(expect).epsilon(1e-14));
    }
    SUBCASE("commutes with cyclic shifts") {
        Tensor k = random_tensor({3, 2, 3, 3}, rng);
        for (auto [sh, sw] : {std::pair{1L, 0L}, {3L, -2L}, {-5L, 7L}}) {
            Tensor lhs = conv2d_circular(leaf(cyclic_shift(x, sh, sw)), leaf(k), leaf(b))->value;
            Tensor rhs = cyclic_shift(conv2d_circular(leaf(x), leaf(k), leaf(b))->value, sh, sw);
            CHECK(max_abs_diff(lhs, rhs) < 1e-12);
        }
    }
    SUBCASE("even or oversized kernels are rejected") {
        CHECK_THROWS_AS(conv2d_circular(leaf(x), leaf(Tensor(Shape{1, 2, 2, 2})), nullptr), std::invalid_argument);
        CHECK_THROWS_AS(conv2d_circular(leaf(x), leaf(Tensor(Shape{1, 2, 9, 9})), nullptr), std::invalid_argument);
    }
    SUBCASE("gradcheck") {
        auto r = gradcheck([](const std::vector<Var>& v) { return conv2d_circular(v[0], v[1], v[2]); },
                           {leaf(x), leaf(random_tensor({3, 2, 3, 3}, rng)), leaf(b)});
        CHECK(r.max_rel_error < 1e-5);
    }
}

TEST_CASE("maxpool2") {
    Tensor block(Shape{1, 2, 2}, {1, 2, 3, 4});
    CHECK(maxpool2(leaf(block))->value.item() == 4.0);
    Tensor c(Shape{2, 4, 6}, -3.0);
    Tensor pooled = maxpool2(leaf(c))->value;
    CHECK(pooled.shape() == Shape{2, 2, 3});
    for (double v : pooled.data()) CHECK(v == -3.0);
    CHECK_THROWS_AS(maxpool2(leaf(Tensor(Shape{1, 3, 4}))), std::invalid_argument);

    SUBCASE("tie-break sends gradient to the first maximum") {
        Var x = leaf(Tensor(Shape{1, 2, 2}, {5, 5, 5, 5}));
        backward(sum(maxpool2(x)));
        CHECK(x->grad.storage() == std::vector<double>{1, 0, 0, 0});
    }
    SUBCASE("commutes with even shifts") {
        Rng rng(3);
        Tensor x = random_tensor({2, 8, 8}, rng);
        Tensor lhs = maxpool2(leaf(cyclic_shift(x, 2, -4)))->value;
        Tensor rhs = cyclic_shift(maxpool2(leaf(x))->value, 1, -2);
        CHECK(max_abs_diff(lhs, rhs) == 0.0);
    }
    SUBCASE("gradcheck") {
        Rng rng(4);
        auto r = gradcheck([](const std::vector<Var>& v) { return maxpool2(v[0]); }, {leaf(random_tensor({2, 6, 6}, rng))});
        CHECK(r.max_rel_error < 1e-5);
    }
}

TEST_CASE("bilinear_upsample2") {
    Tensor c(Shape{1, 3, 4}, 2.5);
    const Tensor up_c = bilinear_upsample2(leaf(c))->value;
    for (double v : up_c.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
    CHECK_THROWS_AS(bilinear_upsample2(leaf(Tensor(Shape{1, 1, 4}))), std::invalid_argument);

    SUBCASE("linear ramp is preserved away from the periodic seam") {
        const std::size_t n = 8;
        Tensor ramp(Shape{1, n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) ramp.at(0, i, j) = static_cast<double>(j);
        Tensor up = bilinear_upsample2(leaf(ramp))->value;
        // fine sample q sits at coarse coordinate (q + 0.5) / 2 - 0.5
        for (std::size_t q = 1; q + 1 < 2 * n; ++q)
            CHECK(up.at(0, 3, q) == doctest::Approx((static_cast<double>(q) + 0.5) / 2.0 - 0.5).epsilon(1e-14));
    }
    SUBCASE("commutes with shifts (coarse s, fine 2s)") {
        Rng rng(5);
        Tensor x = random_tensor({2, 4, 8}, rng);
        CHECK(max_abs_diff(bilinear_upsample2(leaf(cyclic_shift(x, 1, 3)))->value,
                           cyclic_shift(bilinear_upsample2(leaf(x))->value, 2, 6)) < 1e-12);
    }
    SUBCASE("gradcheck") {
        Rng rng(6);
        auto r = gradcheck([](const std::vector<Var>& v) { return bilinear_upsample2(v[0]); },
                           {leaf(random_tensor({2, 4, 4}, rng))});
        CHECK(r.max_rel_error < 1e-5);
    }
}

TEST_CASE("backward") {
    Rng rng(7);
    Tensor xv = random_tensor({2, 3, 3}, rng);
    SUBCASE("sum gives ones") {
        Var x = leaf(xv);
        backward(sum(x));
        for (double g : x->grad.data()) CHECK(g == 1.0);
    }
    SUBCASE("sum of squares gives 2x, and calls accumulate") {
        Var x = leaf(xv);
        backward(sum(mul(x, x)));
        for (std::size_t i = 0; i < xv.size(); ++i) CHECK(x->grad[i] == doctest::Approx(2 * xv[i]));
        backward(sum(mul(x, x)));
        for (std::size_t i = 0; i < xv.size(); ++i) CHECK(x->grad[i] == doctest::Approx(4 * xv[i]));
        zero_grad(std::vector<Var>{x});
        for (double g : x->grad.data()) CHECK(g == 0.0);
    }
    SUBCASE("non-scalar loss is rejected") { CHECK_THROWS_AS(backward(leaf(xv)), std::invalid_argument); }
    SUBCASE("composite conv, gelu, sum") {
        auto r = gradcheck(
            [](const std::vector<Var>& v) { return sum(gelu(conv2d_circular(v[0], v[1], v[2]))); },
            {leaf(random_tensor({2, 5, 5}, rng)), leaf(random_tensor({2, 2, 3, 3}, rng)), leaf(random_tensor({2}, rng))});
        CHECK(r.max_rel_error < 1e-4);
    }
    SUBCASE("a linear functional reproduces the adjoint exactly") {
        // <conv(x), y> == <x, conv^T(y)>: the gradient w.r.t. x of dot(conv(x), y) is conv^T(y).
        Tensor k = random_tensor({1, 2, 3, 3}, rng);
        Tensor y = random_tensor({1, 3, 3}, rng);
        Var x = leaf(xv);
        backward(dot(conv2d_circular(x, constant(k), nullptr), y));
        double lhs = 0.0, rhs = 0.0;
        Tensor cx = conv2d_circular(constant(xv), constant(k), nullptr)->value;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += cx[i] * y[i];
        for (std::size_t i = 0; i < xv.size(); ++i) rhs += xv[i] * x->grad[i];
        CHECK(std::abs(lhs - rhs) < 1e-13);
    }
    SUBCASE("no-grad guard records no graph") {
        Var x = leaf(xv);
        NoGradGuard guard;
        Var y = gelu(x);
        CHECK(y->parents.empty());
        CHECK_FALSE(y->requires_grad);
    }
}

TEST_CASE("every differentiable op passes gradcheck at random points") {
    Rng rng(8);
    using F = std::function<Var(const std::vector<Var>&)>;
    const std::vector<std::pair<const char*, F>> unary = {
        {"gelu", [](auto& v) { return gelu(v[0]); }},
        {"sigmoid", [](auto& v) { return sigmoid(v[0]); }},
        {"scale", [](auto& v) { return scale(v[0], -1.7); }},
        {"add_scalar", [](auto& v) { return add(v[0], 0.3); }},
        {"global_avg_pool", [](auto& v) { return global_avg_pool(v[0]); }},
        {"global_max_pool", [](auto& v) { return global_max_pool(v[0]); }},
        {"channel_mean", [](auto& v) { return channel_mean(v[0]); }},
        {"channel_max", [](auto& v) { return channel_max(v[0]); }},
        {"pad_spatial", [](auto& v) { return pad_spatial(v[0], 6, 7); }},
        {"crop_spatial", [](auto& v) { return crop_spatial(v[0], 2, 3); }},
        {"relative_l2", [](auto& v) { return relative_l2(v[0], Tensor(Shape{3, 4, 4}, 0.25)); }},
    };
    for (const auto& [name, f] : unary) {
        CAPTURE(name);
        for (std::uint64_t trial = 0; trial < 3; ++trial) {
            auto r = gradcheck(f, {leaf(random_tensor({3, 4, 4}, rng))}, trial);
            CHECK(r.max_rel_error < 1e-4);
        }
    }
    const std::vector<std::pair<const char*, F>> binary = {
        {"add", [](auto& v) { return add(v[0], v[1]); }},
        {"sub", [](auto& v) { return sub(v[0], v[1]); }},
        {"mul", [](auto& v) { return mul(v[0], v[1]); }},
        {"concat", [](auto& v) { return concat_channels(v[0], v[1]); }},
    };
    for (const auto& [name, f] : binary) {
        CAPTURE(name);
        auto r = gradcheck(f, {leaf(random_tensor({3, 4, 4}, rng)), leaf(random_tensor({3, 4, 4}, rng))});
        CHECK(r.max_rel_error < 1e-4);
    }
    for (Shape map : {Shape{3, 1, 1}, Shape{1, 4, 4}, Shape{3, 4, 4}}) {
        CAPTURE(shape_str(map));
        auto r = gradcheck([](auto& v) { return mul_broadcast(v[0], v[1]); },
                           {leaf(random_tensor({3, 4, 4}, rng)), leaf(random_tensor(map, rng))});
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("cyclic_shift moves x[h] to out[h+s]") {
    Tensor x(Shape{1, 1, 4}, {0, 1, 2, 3});
    CHECK(cyclic_shift(x, 0, 1).storage() == std::vector<double>{3, 0, 1, 2});
    CHECK(cyclic_shift(x, 0, -1).storage() == std::vector<double>{1, 2, 3, 0});
}

TEST_CASE("canonical text and binary helpers round trip") {
    KeyValues kv{{"b", "2"}, {"a", "x=y"}};
    CHECK(to_canonical_text(kv) == "a=x=y\nb=2\n");
    CHECK(parse_canonical_text(to_canonical_text(kv)) == kv);
    for (double v : {0.1, -1e-300, 1.0 / 3.0, 6.02214076e23}) CHECK(parse_double(format_double(v)) == v);

    ByteWriter w;
    w.u16(0xBEEF);
    w.named_tensor("t", Tensor(Shape{2}, {1.5, -2.0}));
    ByteReader r(w.buffer());
    CHECK(r.u16() == 0xBEEF);
    auto [name, t] = r.named_tensor();
    CHECK(name == "t");
    CHECK(t.storage() == std::vector<double>{1.5, -2.0});
    ByteReader cut(std::span(w.buffer()).first(w.buffer().size() - 1));
    cut.u16();
    try {
        cut.named_tensor();
        FAIL("expected truncation");
    } catch (const FormatError& e) {
        CHECK(e.code() == FormatErrorCode::truncated);
    }
}

}  // TEST_SUITE
