#include "hafno/data/elliptic.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hafno/error.hpp"

namespace hafno::data {

GridField constant_like(const GridField& like, double value) {
    GridField f = like;
    f.values = Tensor(Shape{1, like.size(), like.size()}, value);
    return f;
}

EllipticSolution solve_elliptic_fd(const GridField& a, const GridField& f, double tol, std::size_t max_iterations) {
    const std::size_t n = a.size();
    if (a.periodic || a.values.rank() != 3 || a.values.dim(0) != 1 || a.values.dim(2) != n)
        throw std::invalid_argument("solve_elliptic_fd: a must be a square single-channel non-periodic field");
    if (f.values.shape() != a.values.shape())
        throw std::invalid_argument("solve_elliptic_fd: f shape " + shape_str(f.values.shape()) + " != a shape " +
                                    shape_str(a.values.shape()));
    if (n < 3) throw std::invalid_argument("solve_elliptic_fd: need at least 3 nodes per side");
    for (double v : a.values.data())
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("solve_elliptic_fd: a must be positive and finite");

    const std::size_t m = n - 2;  // interior nodes per side
    const double inv_h2 = 1.0 / (a.spacing() * a.spacing());
    auto A = [&](std::size_t i, std::size_t j) { return a.values.at(0, i, j); };
    auto face = [](double x, double y) { return 2.0 * x * y / (x + y); };
    auto id = [m](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>((i - 1) * m + (j - 1)); };

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * m * m);
    Eigen::VectorXd b(static_cast<Eigen::Index>(m * m));
    for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            const double c = A(i, j);
            const double an = face(c, A(i - 1, j)), as = face(c, A(i + 1, j));
            const double aw = face(c, A(i, j - 1)), ae = face(c, A(i, j + 1));
            const auto row = id(i, j);
            trip.emplace_back(row, row, (an + as + aw + ae) * inv_h2);
            // Boundary neighbours carry u = 0 and drop out.
            if (i > 1) trip.emplace_back(row, id(i - 1, j), -an * inv_h2);
            if (i < m) trip.emplace_back(row, id(i + 1, j), -as * inv_h2);
            if (j > 1) trip.emplace_back(row, id(i, j - 1), -aw * inv_h2);
            if (j < m) trip.emplace_back(row, id(i, j + 1), -ae * inv_h2);
            b[row] = f.values.at(0, i, j);
        }
    Eigen::SparseMatrix<double> K(static_cast<Eigen::Index>(m * m), static_cast<Eigen::Index>(m * m));
    K.setFromTriplets(trip.begin(), trip.end());

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(tol);
    cg.setMaxIterations(static_cast<Eigen::Index>(max_iterations ? max_iterations : 10 * m * m));
    cg.compute(K);
    Eigen::VectorXd x = cg.solve(b);
    if (cg.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "elliptic CG did not converge: relative residual " << cg.error() << " after " << cg.iterations()
            << " iterations (tol " << tol << ", grid " << n << "x" << n << ")";
        throw Error(ErrorKind::generation, msg.str());
    }

    EllipticSolution out;
    out.u = a;
    out.u.values = Tensor(a.values.shape());
    for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = 1; j <= m; ++j) out.u.values.at(0, i, j) = x[id(i, j)];
    out.iterations = static_cast<std::size_t>(cg.iterations());
    out.relative_residual = b.norm() > 0 ? (b - K * x).norm() / b.norm() : 0.0;
    return out;
}

}  // namespace hafno::data
