#include "hafno/data/coefficients.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hafno/util/rng.hpp"

namespace hafno::data {

namespace {

constexpr double kPi = std::numbers::pi;

void check_resolution(std::size_t n) {
    if (n < 16) throw std::invalid_argument("coefficient resolution " + std::to_string(n) + " below minimum 16");
}

// basis[j][i] = s_j cos(pi j x_i) on the n nodes of [0,1].
std::vector<double> cosine_table(std::size_t modes, std::size_t n) {
    std::vector<double> t(modes * n);
    for (std::size_t j = 0; j < modes; ++j) {
        const double s = j == 0 ? 1.0 : std::sqrt(2.0);
        for (std::size_t i = 0; i < n; ++i)
            t[j * n + i] = s * std::cos(kPi * static_cast<double>(j) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return t;
}

}  // namespace

TrigCoefficient draw_trig_coefficient(std::uint64_t seed) {
    Rng rng(seed, "trig");
    TrigCoefficient c;
    for (std::size_t k = 0; k < 6; ++k) {
        const double lo = std::ldexp(1.0, static_cast<int>(k));
        c.a_k[k] = rng.uniform(lo, 1.5 * lo);
    }
    return c;
}

GridField eval_trig_coefficient(const TrigCoefficient& c, std::size_t n) {
    check_resolution(n);
    GridField a{Tensor(Shape{1, n, n}), -1.0, 1.0, false};
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = a.coord(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double x2 = a.coord(j);
            double v = 1.0;
            for (double ak : c.a_k)
                v *= (1.0 + 0.5 * std::cos(ak * kPi * (x1 + x2))) * (1.0 + 0.5 * std::sin(ak * kPi * (x2 - 3.0 * x1)));
            a.values.at(0, i, j) = v;
        }
    }
    return a;
}

GridField gen_trig_coefficient(std::uint64_t seed, std::size_t n) {
    return eval_trig_coefficient(draw_trig_coefficient(seed), n);
}

double grf_amplitude(std::size_t j, std::size_t k, double c) {
    return 1.0 / (kPi * kPi * static_cast<double>(j * j + k * k) + c);
}

Tensor draw_grf_coefficients(std::uint64_t seed, const GrfParams& p) {
    if (!(p.c > 0.0)) throw std::invalid_argument("GRF: c must be positive");
    if (p.modes == 0) throw std::invalid_argument("GRF: modes must be positive");
    Rng rng(seed, "grf");
    Tensor xi(Shape{p.modes, p.modes});
    for (double& v : xi.storage()) v = rng.normal();
    return xi;
}

GridField eval_grf(const Tensor& xi, const GrfParams& p, std::size_t n) {
    check_resolution(n);
    const std::size_t J = p.modes;
    const auto T = cosine_table(J, n);
    // g = T^T (A .* xi) T, evaluated as two dense passes.
    std::vector<double> tmp(J * n, 0.0);  // tmp[j][i2] = sum_k A_jk xi_jk T[k][i2]
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t k = 0; k < J; ++k) {
            const double w = grf_amplitude(j, k, p.c) * xi[j * J + k];
            for (std::size_t i2 = 0; i2 < n; ++i2) tmp[j * n + i2] += w * T[k * n + i2];
        }
    GridField g{Tensor(Shape{1, n, n}), 0.0, 1.0, false};
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t i1 = 0; i1 < n; ++i1) {
            const double t = T[j * n + i1];
            for (std::size_t i2 = 0; i2 < n; ++i2) g.values.at(0, i1, i2) += t * tmp[j * n + i2];
        }
    return g;
}

GridField sample_grf(std::uint64_t seed, std::size_t n, const GrfParams& p) {
    return eval_grf(draw_grf_coefficients(seed, p), p, n);
}

Tensor project_cosine_basis(const GridField& g, std::size_t modes) {
    const std::size_t n = g.size();
    if (modes > n - 1) throw std::invalid_argument("project_cosine_basis: too many modes for the grid");
    const auto T = cosine_table(modes, n);
    const double h = 1.0 / static_cast<double>(n - 1);
    std::vector<double> w(n, h);
    w.front() = w.back() = 0.5 * h;
    Tensor out(Shape{modes, modes});
    for (std::size_t j = 0; j < modes; ++j)
        for (std::size_t k = 0; k < modes; ++k) {
            double acc = 0.0;
            for (std::size_t i1 = 0; i1 < n; ++i1) {
                double row = 0.0;
                for (std::size_t i2 = 0; i2 < n; ++i2) row += w[i2] * T[k * n + i2] * g.values.at(0, i1, i2);
                acc += w[i1] * T[j * n + i1] * row;
            }
            out[j * modes + k] = acc;
        }
    return out;
}

GridField sample_grf_twophase(std::uint64_t seed, std::size_t n, double c, double a_min, double a_max,
                              std::size_t modes) {
    if (!(a_max > a_min && a_min > 0.0)) throw std::invalid_argument("two-phase: need a_max > a_min > 0");
    GridField g = sample_grf(seed, n, GrfParams{c, modes});
    for (double& v : g.values.storage()) v = v >= 0.0 ? a_max : a_min;
    return g;
}

GridField sample_grf_smooth(std::uint64_t seed, std::size_t n, const GrfParams& p) {
    GridField g = sample_grf(seed, n, p);
    for (double& v : g.values.storage()) v = std::exp(v);
    return g;
}

}  // namespace hafno::data
