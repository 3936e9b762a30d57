#pragma once

#include <cstdint>

#include "hafno/core/tensor.hpp"

namespace hafno::data {

/// Multi-channel field sampled on a uniform square grid over [lo, hi]^2.
///
/// Non-periodic grids place nodes on both endpoints (x_i = lo + i h, h = (hi-lo)/(n-1));
/// periodic grids omit the right endpoint (h = (hi-lo)/n). Row index i maps to x1,
/// column index j to x2.
struct GridField {
    Tensor values;  // [C, n, n]
    double lo = 0.0;
    double hi = 1.0;
    bool periodic = false;

    std::size_t channels() const { return values.dim(0); }
    std::size_t size() const { return values.dim(1); }
    double spacing() const {
        const std::size_t n = size();
        return (hi - lo) / static_cast<double>(periodic ? n : n - 1);
    }
    double coord(std::size_t i) const { return lo + spacing() * static_cast<double>(i); }
};

/// Bilinear resampling onto the target grid's nodes (same domain and periodicity).
/// target == source returns an identical copy; target > source is rejected.
GridField downsample_field(const GridField& x, std::size_t target);

/// u + eps * std(u) * Z with Z iid standard normal from (seed, "noise").
Tensor add_noise(const Tensor& u, double eps, std::uint64_t seed);

/// Population standard deviation over all entries.
double field_std(const Tensor& x);

}  // namespace hafno::data
