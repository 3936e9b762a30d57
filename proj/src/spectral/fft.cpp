#include "hafno/spectral/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace hafno::spectral {

namespace {

// Plans are created once per (length, direction) under a lock; fftw_execute_dft
// on a cached plan is thread-safe. FFTW_UNALIGNED lets any buffer be used.
fftw_plan plan_for(std::size_t n, bool inverse) {
    static std::mutex mutex;
    static std::map<std::pair<std::size_t, bool>, fftw_plan> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find({n, inverse});
    if (it != cache.end()) return it->second;
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw: cannot plan length " + std::to_string(n));
    return cache.emplace(std::make_pair(n, inverse), p).first->second;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::span<cplx> data, bool inverse) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("fft: empty input");
    if (n == 1) return;
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_for(n, inverse), buf, buf);
}

Tensor rfft2(const Tensor& x) {
    if (x.rank() != 3) throw std::invalid_argument("rfft2: expected [C, H, W], got " + shape_str(x.shape()));
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), Wh = W / 2 + 1;
    if (H < 2 || W < 2 || !is_power_of_two(H) || !is_power_of_two(W)) {
        throw std::invalid_argument("rfft2: grid " + shape_str(x.shape()) + " must be powers of two >= 2");
    }
    Tensor out(Shape{C, H, Wh, 2});
    auto oc = as_complex(out.data());
    std::vector<cplx> row(W), col(H);
    for (std::size_t c = 0; c < C; ++c) {
        cplx* plane = oc.data() + c * H * Wh;
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t w = 0; w < W; ++w) row[w] = {x.at(c, h, w), 0.0};
            fft_inplace(row, false);
            for (std::size_t k = 0; k < Wh; ++k) plane[h * Wh + k] = row[k];
        }
        for (std::size_t k = 0; k < Wh; ++k) {
            for (std::size_t h = 0; h < H; ++h) col[h] = plane[h * Wh + k];
            fft_inplace(col, false);
            for (std::size_t h = 0; h < H; ++h) plane[h * Wh + k] = col[h];
        }
    }
    return out;
}

Tensor irfft2(const Tensor& coeffs, std::size_t H, std::size_t W) {
    const std::size_t Wh = W / 2 + 1;
    if (coeffs.rank() != 4 || coeffs.dim(1) != H || coeffs.dim(2) != Wh || coeffs.dim(3) != 2) {
        throw std::invalid_argument("irfft2: coefficients " + shape_str(coeffs.shape()) + " inconsistent with grid " +
                                    std::to_string(H) + "x" + std::to_string(W));
    }
    if (H < 2 || W < 2 || !is_power_of_two(H) || !is_power_of_two(W)) {
        throw std::invalid_argument("irfft2: grid must be powers of two >= 2");
    }
    const std::size_t C = coeffs.dim(0);
    Tensor out(Shape{C, H, W});
    auto ic = as_complex(coeffs.data());
    std::vector<cplx> plane(H * Wh), col(H), row(W);
    const double norm = 1.0 / static_cast<double>(H * W);
    for (std::size_t c = 0; c < C; ++c) {
        const cplx* src = ic.data() + c * H * Wh;
        for (std::size_t k = 0; k < Wh; ++k) {
            for (std::size_t h = 0; h < H; ++h) col[h] = src[h * Wh + k];
            fft_inplace(col, true);
            for (std::size_t h = 0; h < H; ++h) plane[h * Wh + k] = col[h];
        }
        for (std::size_t h = 0; h < H; ++h) {
            const cplx* z = plane.data() + h * Wh;
            row[0] = {z[0].real(), 0.0};
            row[W / 2] = {z[W / 2].real(), 0.0};
            for (std::size_t k = 1; k < W / 2; ++k) {
                row[k] = z[k];
                row[W - k] = std::conj(z[k]);
            }
            fft_inplace(row, true);
            for (std::size_t w = 0; w < W; ++w) out.at(c, h, w) = row[w].real() * norm;
        }
    }
    return out;
}

}  // namespace hafno::spectral
