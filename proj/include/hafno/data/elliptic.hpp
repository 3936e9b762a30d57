#pragma once

#include "hafno/data/grid.hpp"

namespace hafno::data {

struct EllipticSolution {
    GridField u;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/// Solves -div(a grad u) = f on the node grid with u = 0 on the boundary nodes.
///
/// Five-point conservative stencil; the face coefficient between neighbouring
/// nodes is the harmonic mean of their a values. The SPD interior system is
/// solved by Jacobi-preconditioned CG to ||r|| / ||b|| < tol.
/// Throws Error(generation) with the reached residual if CG does not converge
/// within max_iterations (0 selects 10 * unknowns), and std::invalid_argument
/// for non-positive or non-finite a.
EllipticSolution solve_elliptic_fd(const GridField& a, const GridField& f, double tol = 1e-8,
                                   std::size_t max_iterations = 0);

/// f == value on the grid of `like`.
GridField constant_like(const GridField& like, double value);

}  // namespace hafno::data
