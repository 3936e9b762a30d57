#pragma once

#include <vector>

#include "hafno/core/autodiff.hpp"
#include "hafno/spectral/fft.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::spectral {

/// Fourier coefficients of a [C,H,W] field in real-FFT layout.
///
/// Full spectra hold coeffs [C, H, W/2+1, 2]. Truncated ("compact") spectra
/// hold [C, 2*m1, m2, 2]: rows 0..m1-1 then rows H-m1..H-1, columns 0..m2-1.
struct Spectrum {
    Tensor coeffs;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t channels() const { return coeffs.dim(0); }
    bool compact() const { return coeffs.dim(1) != height || coeffs.dim(2) != width / 2 + 1; }
};

Spectrum forward(const Tensor& field);
Tensor inverse(const Spectrum& s);

/// Keeps the m1 lowest positive and negative row frequencies and the m2 lowest columns.
Spectrum truncate_modes(const Spectrum& s, std::size_t m1, std::size_t m2);
/// Zero-fills a compact spectrum back to the full layout.
Spectrum pad_modes(const Spectrum& s);

/// Learnable per-mode complex channel mixing R[k] in C^{C_out x C_in}.
/// Real and imaginary parts are separate [2*m1, m2, C_in, C_out] leaves.
struct SpectralKernel {
    Var re;
    Var im;
    std::size_t m1 = 0;
    std::size_t m2 = 0;
    std::size_t c_in = 0;
    std::size_t c_out = 0;

    std::size_t parameter_count() const { return 2 * (2 * m1) * m2 * c_in * c_out; }
};

Shape spectral_weight_shape(std::size_t m1, std::size_t m2, std::size_t c_in, std::size_t c_out);

/// Uniform(-s, s) with s = 1 / (c_in c_out sqrt(m1 m2)) for both parts.
SpectralKernel make_spectral_kernel(std::size_t m1, std::size_t m2, std::size_t c_in, std::size_t c_out, Rng& rng);
SpectralKernel identity_spectral_kernel(std::size_t m1, std::size_t m2, std::size_t channels);

/// out[o, k] = sum_i R[k, i, o] s[i, k] on every retained mode.
Spectrum spectral_multiply(const Spectrum& s, const SpectralKernel& R);

/// Retained-mode mask [H][W/2+1] for cut (m1, m2), closed under the conjugate
/// pairing of the self-conjugate columns 0 and W/2 (which a real field cannot
/// populate asymmetrically).
std::vector<bool> kept_mode_mask(std::size_t H, std::size_t W, std::size_t m1, std::size_t m2);

void check_mode_cut(std::size_t H, std::size_t W, std::size_t m1, std::size_t m2);

// Differentiable stages. Complex values travel as real tensors with a trailing 2.
Var rfft2_node(const Var& x);
Var irfft2_node(const Var& s, std::size_t H, std::size_t W);
Var truncate_node(const Var& s, std::size_t m1, std::size_t m2);
Var pad_node(const Var& s, std::size_t H, std::size_t W);
Var spectral_multiply_node(const Var& s, const SpectralKernel& R);

/// irfft2(pad(R . truncate(rfft2(v)))) for v [C_in,H,W] -> [C_out,H,W].
Var fourier_unit(const Var& v, const SpectralKernel& R);

}  // namespace hafno::spectral
