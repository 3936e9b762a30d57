#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "hafno/core/tensor.hpp"

namespace hafno::spectral {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// In-place unnormalised complex DFT of any length (FFTW-backed). `inverse` flips the exponent sign
/// to +; no 1/n factor is applied in either direction.
void fft_inplace(std::span<cplx> data, bool inverse);

/// Forward real 2D DFT of every channel of x [C,H,W] -> [C,H,W/2+1,2]. Unnormalised.
Tensor rfft2(const Tensor& x);

/// Inverse of rfft2 with 1/(H*W) normalisation. The imaginary parts of the
/// self-conjugate columns (0 and W/2) are discarded, as for any c2r transform.
Tensor irfft2(const Tensor& coeffs, std::size_t H, std::size_t W);

/// Multiplicity of half-spectrum column c in the full spectrum (1 or 2).
inline double column_weight(std::size_t c, std::size_t W) { return (c == 0 || 2 * c == W) ? 1.0 : 2.0; }

/// Signed frequency of FFT index i on an axis of length n (Nyquist maps to -n/2).
inline long signed_frequency(std::size_t i, std::size_t n) {
    return 2 * i < n ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

}  // namespace hafno::spectral
