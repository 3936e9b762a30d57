#pragma once

#include <cstdint>
#include <functional>

#include "hafno/core/tensor.hpp"

namespace hafno::data {

/// 2D incompressible Navier-Stokes in vorticity form on the unit torus [0,1)^2:
///   w_t + u . grad w = nu Laplacian(w) + f,  u = (psi_x2, -psi_x1),  -Laplacian(psi) = w.
struct NSSpec {
    double nu = 1e-3;
    std::size_t resolution = 64;
    std::size_t frames = 20;        // recorded at t = 1, 2, ..., frames
    double dt_max = 1.0 / 128.0;    // initial step; halved while the CFL bound is exceeded
    double dt_min = 1.0 / 1048576.0;
    double cfl = 0.25;              // max over the grid of dt |u| / h
    double forcing_amplitude = 0.1; // f = A (sin(2 pi (x1+x2)) + cos(2 pi (x1+x2)))
};

struct NSDiagnostics {
    std::size_t steps = 0;
    double final_dt = 0.0;
    double max_cfl = 0.0;
};

Tensor ns_forcing(const NSSpec& spec);

/// Integrates from w0 [1,n,n] and returns frames [frames, n, n] at unit time intervals.
/// Pseudo-spectral: velocity from the streamfunction in Fourier space, 2/3-rule
/// dealiasing of the advection term, Crank-Nicolson viscosity, Heun advection.
/// Throws Error(generation) if the CFL bound still fails at dt_min.
Tensor solve_ns_vorticity(const Tensor& w0, const Tensor& forcing, const NSSpec& spec,
                          NSDiagnostics* diag = nullptr);

/// Periodic Gaussian field with spectrum sigma (4 pi^2 |k|^2 + tau^2)^{-alpha/2}, mean zero.
struct PeriodicGrfParams {
    double alpha = 2.5;
    double tau = 7.0;
    double sigma = 18.520259177452136;  // tau^{1.5}
};

Tensor sample_periodic_grf(std::uint64_t seed, std::size_t n, const PeriodicGrfParams& p = {});

/// Velocity (u1, u2) of a vorticity field, [2, n, n].
Tensor velocity_from_vorticity(const Tensor& w);

/// Max |d u1/d x1 + d u2/d x2| evaluated spectrally.
double spectral_divergence(const Tensor& velocity);

}  // namespace hafno::data
