#include "hafno/data/grid.hpp"

#include <cmath>
#include <stdexcept>

#include "hafno/util/rng.hpp"

namespace hafno::data {

GridField downsample_field(const GridField& x, std::size_t target) {
    const std::size_t n = x.size();
    if (x.values.rank() != 3 || x.values.dim(2) != n) {
        throw std::invalid_argument("downsample_field: expected a square [C,n,n] field, got " + shape_str(x.values.shape()));
    }
    if (target > n) {
        throw std::invalid_argument("downsample_field: target " + std::to_string(target) + " exceeds source " +
                                    std::to_string(n) + "; upsampling is not supported");
    }
    if (target < 2) throw std::invalid_argument("downsample_field: target must be at least 2");
    if (target == n) return x;

    GridField out{Tensor(Shape{x.channels(), target, target}), x.lo, x.hi, x.periodic};
    const double hs = x.spacing();
    // Source index position of each target node, with its two neighbours and weight.
    struct Tap {
        std::size_t i0, i1;
        double t;
    };
    std::vector<Tap> taps(target);
    for (std::size_t q = 0; q < target; ++q) {
        double pos = (out.coord(q) - x.lo) / hs;
        if (std::abs(pos - std::round(pos)) < 1e-9) pos = std::round(pos);  // node hits stay exact
        auto i0 = static_cast<std::size_t>(std::floor(pos));
        double t = pos - static_cast<double>(i0);
        std::size_t i1 = i0 + 1;
        if (x.periodic) {
            i0 %= n;
            i1 %= n;
        } else if (i0 >= n - 1) {
            i0 = n - 1;
            i1 = n - 1;
            t = 0.0;
        }
        taps[q] = {i0, i1, t};
    }
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (std::size_t p = 0; p < target; ++p)
            for (std::size_t q = 0; q < target; ++q) {
                const Tap& r = taps[p];
                const Tap& s = taps[q];
                const double v00 = x.values.at(c, r.i0, s.i0), v01 = x.values.at(c, r.i0, s.i1);
                const double v10 = x.values.at(c, r.i1, s.i0), v11 = x.values.at(c, r.i1, s.i1);
                out.values.at(c, p, q) = (1 - r.t) * ((1 - s.t) * v00 + s.t * v01) + r.t * ((1 - s.t) * v10 + s.t * v11);
            }
    return out;
}

double field_std(const Tensor& x) {
    if (x.size() == 0) return 0.0;
    double mean = 0.0;
    for (double v : x.data()) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x.data()) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(x.size()));
}

Tensor add_noise(const Tensor& u, double eps, std::uint64_t seed) {
    if (!(eps >= 0.0)) throw std::invalid_argument("add_noise: eps must be >= 0");
    if (eps == 0.0) return u;
    Rng rng(seed, "noise");
    const double scale = eps * field_std(u);
    Tensor out = u;
    for (double& v : out.storage()) v += scale * rng.normal();
    return out;
}

}  // namespace hafno::data
