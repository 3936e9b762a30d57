#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hafno/core/autodiff.hpp"

namespace hafno::diagnostics {

struct GradcheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Worst entry seen.
    std::size_t worst_leaf = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Central-difference check of d(sum(f(leaves) * probe))/d(leaves) against backward().
/// `points` entries per leaf are sampled (all if the leaf is smaller). Per leaf the
/// error is max |analytic - numeric| / max(max |numeric|, 1e-8); the result is the
/// max over leaves. For maps affine in every single scalar (linear and multilinear
/// ops) the difference quotient is exact for any h, and h = 1 removes truncation error.
GradcheckResult gradcheck(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Var> leaves,
                          std::uint64_t seed = 7, std::size_t points = 10, double h = 1e-5);

struct GradcheckEntry {
    std::string op;
    bool linear = false;
    double tolerance = 0.0;
    GradcheckResult result;

    bool passed() const { return result.max_rel_error < tolerance; }
};

/// Every differentiable operation plus the full-model loss at fixed seeds.
/// Multilinear ops use h = 1 against 1e-10; GELU paths 1e-6; the rest 1e-4.
std::vector<GradcheckEntry> gradcheck_suite();

/// One line per failing entry with op name, leaf, index, analytic and numeric values.
std::string describe_failures(const std::vector<GradcheckEntry>& entries);

}  // namespace hafno::diagnostics
