#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "hafno/data/grid.hpp"

namespace hafno::data {

/// a(x) = prod_{k=1..6} (1 + cos(a_k pi (x1+x2))/2)(1 + sin(a_k pi (x2-3x1))/2) on [-1,1]^2,
/// a_k ~ U[2^{k-1}, 1.5 * 2^{k-1}].
struct TrigCoefficient {
    std::array<double, 6> a_k{};
};

TrigCoefficient draw_trig_coefficient(std::uint64_t seed);
GridField eval_trig_coefficient(const TrigCoefficient& c, std::size_t resolution);
GridField gen_trig_coefficient(std::uint64_t seed, std::size_t resolution);

/// Gaussian field g ~ N(0, (-Laplacian + c)^{-2}) with Neumann boundary on [0,1]^2,
/// expanded in the cosine eigenbasis phi_jk = s_j s_k cos(pi j x1) cos(pi k x2)
/// (s_0 = 1, s_j = sqrt 2) for 0 <= j, k < modes.
struct GrfParams {
    double c = 9.0;
    std::size_t modes = 32;
};

double grf_amplitude(std::size_t j, std::size_t k, double c);

/// Standard-normal coefficients xi_jk in row-major [modes, modes] order.
Tensor draw_grf_coefficients(std::uint64_t seed, const GrfParams& p);
/// g(x) = sum xi_jk amplitude_jk phi_jk(x) on an n-node grid over [0,1]^2.
GridField eval_grf(const Tensor& xi, const GrfParams& p, std::size_t resolution);
GridField sample_grf(std::uint64_t seed, std::size_t resolution, const GrfParams& p);

/// Coefficients <g, phi_jk> recovered with trapezoid weights (exact for j, k < n-1).
Tensor project_cosine_basis(const GridField& g, std::size_t modes);

/// a = a_max where g >= 0, else a_min.
GridField sample_grf_twophase(std::uint64_t seed, std::size_t resolution, double c, double a_min, double a_max,
                              std::size_t modes = 32);
/// a = exp(g): smooth, log-normal coefficient.
GridField sample_grf_smooth(std::uint64_t seed, std::size_t resolution, const GrfParams& p);

}  // namespace hafno::data
