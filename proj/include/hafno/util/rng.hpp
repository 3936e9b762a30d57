#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hafno {

std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for (seed, purpose, index). Streams for different
/// indices do not depend on generation order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0)
        : engine_(derive_seed(seed, purpose, index)) {}

    /// Uniform in [lo, hi) from the top 53 bits of one draw.
    double uniform(double lo = 0.0, double hi = 1.0) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }
    double normal() { return normal_(engine_); }
    std::uint64_t next() { return engine_(); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hafno
