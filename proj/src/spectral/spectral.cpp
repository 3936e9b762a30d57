#include "hafno/spectral/spectral.hpp"

#include <cmath>
#include <stdexcept>

namespace hafno::spectral {

namespace {

std::size_t source_row(std::size_t q, std::size_t m1, std::size_t H) { return q < m1 ? q : H - 2 * m1 + q; }

Tensor truncate_tensor(const Tensor& full, std::size_t H, std::size_t Wh, std::size_t m1, std::size_t m2) {
    const std::size_t C = full.dim(0);
    Tensor out(Shape{C, 2 * m1, m2, 2});
    auto src = as_complex(full.data());
    auto dst = as_complex(out.data());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t q = 0; q < 2 * m1; ++q)
            for (std::size_t k = 0; k < m2; ++k)
                dst[(c * 2 * m1 + q) * m2 + k] = src[(c * H + source_row(q, m1, H)) * Wh + k];
    return out;
}

Tensor pad_tensor(const Tensor& compact, std::size_t H, std::size_t Wh) {
    const std::size_t C = compact.dim(0), m1 = compact.dim(1) / 2, m2 = compact.dim(2);
    Tensor out(Shape{C, H, Wh, 2});
    auto src = as_complex(compact.data());
    auto dst = as_complex(out.data());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t q = 0; q < 2 * m1; ++q)
            for (std::size_t k = 0; k < m2; ++k)
                dst[(c * H + source_row(q, m1, H)) * Wh + k] = src[(c * 2 * m1 + q) * m2 + k];
    return out;
}

void check_kernel(const SpectralKernel& R) {
    const Shape expect = spectral_weight_shape(R.m1, R.m2, R.c_in, R.c_out);
    if (!R.re || !R.im || R.re->shape() != expect || R.im->shape() != expect) {
        throw std::invalid_argument("spectral kernel weights do not match shape " + shape_str(expect));
    }
}

// Core of the per-mode product on raw tensors.
Tensor multiply_tensor(const Tensor& s, const Tensor& re, const Tensor& im, const SpectralKernel& R) {
    const std::size_t rows = 2 * R.m1, cols = R.m2, Ci = R.c_in, Co = R.c_out;
    if (s.rank() != 4 || s.dim(0) != Ci || s.dim(1) != rows || s.dim(2) != cols) {
        throw std::invalid_argument("spectral_multiply: spectrum " + shape_str(s.shape()) + " does not match kernel " +
                                    shape_str(spectral_weight_shape(R.m1, R.m2, Ci, Co)));
    }
    Tensor out(Shape{Co, rows, cols, 2});
    auto sc = as_complex(s.data());
    auto oc = as_complex(out.data());
    const std::size_t modes = rows * cols;
    for (std::size_t m = 0; m < modes; ++m) {
        const double* wr = re.data().data() + m * Ci * Co;
        const double* wi = im.data().data() + m * Ci * Co;
        for (std::size_t i = 0; i < Ci; ++i) {
            const cplx si = sc[i * modes + m];
            for (std::size_t o = 0; o < Co; ++o) {
                oc[o * modes + m] += cplx(wr[i * Co + o], wi[i * Co + o]) * si;
            }
        }
    }
    return out;
}

}  // namespace

void check_mode_cut(std::size_t H, std::size_t W, std::size_t m1, std::size_t m2) {
    if (m1 < 1 || m2 < 1 || 2 * m1 > H || m2 > W / 2 + 1) {
        throw std::invalid_argument("mode cut (" + std::to_string(m1) + ", " + std::to_string(m2) +
                                    ") exceeds the Nyquist limit of a " + std::to_string(H) + "x" +
                                    std::to_string(W) + " grid");
    }
}

Spectrum forward(const Tensor& field) { return Spectrum{rfft2(field), field.dim(1), field.dim(2)}; }

Tensor inverse(const Spectrum& s) {
    if (s.height == 0 || s.width == 0) throw std::invalid_argument("inverse: spectrum has no spatial dims");
    if (s.compact()) return irfft2(pad_modes(s).coeffs, s.height, s.width);
    return irfft2(s.coeffs, s.height, s.width);
}

Spectrum truncate_modes(const Spectrum& s, std::size_t m1, std::size_t m2) {
    if (s.compact()) throw std::invalid_argument("truncate_modes: spectrum is already truncated");
    check_mode_cut(s.height, s.width, m1, m2);
    return Spectrum{truncate_tensor(s.coeffs, s.height, s.width / 2 + 1, m1, m2), s.height, s.width};
}

Spectrum pad_modes(const Spectrum& s) {
    if (!s.compact()) return s;
    return Spectrum{pad_tensor(s.coeffs, s.height, s.width / 2 + 1), s.height, s.width};
}

Shape spectral_weight_shape(std::size_t m1, std::size_t m2, std::size_t c_in, std::size_t c_out) {
    return Shape{2 * m1, m2, c_in, c_out};
}

SpectralKernel make_spectral_kernel(std::size_t m1, std::size_t m2, std::size_t c_in, std::size_t c_out, Rng& rng) {
    const Shape shape = spectral_weight_shape(m1, m2, c_in, c_out);
    const double s = 1.0 / (static_cast<double>(c_in * c_out) * std::sqrt(static_cast<double>(m1 * m2)));
    Tensor re(shape), im(shape);
    for (double& v : re.data()) v = rng.uniform(-s, s);
    for (double& v : im.data()) v = rng.uniform(-s, s);
    return SpectralKernel{leaf(std::move(re), true, "spectral.re"), leaf(std::move(im), true, "spectral.im"), m1, m2,
                          c_in, c_out};
}

SpectralKernel identity_spectral_kernel(std::size_t m1, std::size_t m2, std::size_t channels) {
    const Shape shape = spectral_weight_shape(m1, m2, channels, channels);
    Tensor re(shape), im(shape);
    for (std::size_t m = 0; m < 2 * m1 * m2; ++m)
        for (std::size_t c = 0; c < channels; ++c) re[(m * channels + c) * channels + c] = 1.0;
    return SpectralKernel{leaf(std::move(re)), leaf(std::move(im)), m1, m2, channels, channels};
}

Spectrum spectral_multiply(const Spectrum& s, const SpectralKernel& R) {
    check_kernel(R);
    return Spectrum{multiply_tensor(s.coeffs, R.re->value, R.im->value, R), s.height, s.width};
}

std::vector<bool> kept_mode_mask(std::size_t H, std::size_t W, std::size_t m1, std::size_t m2) {
    const std::size_t Wh = W / 2 + 1;
    std::vector<bool> mask(H * Wh, false);
    auto row_kept = [&](std::size_t r) { return r < m1 || r >= H - m1; };
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t k = 0; k < m2; ++k) {
            bool kept = row_kept(r);
            if (column_weight(k, W) == 1.0) kept = kept || row_kept((H - r) % H);
            mask[r * Wh + k] = kept;
        }
    return mask;
}

Var rfft2_node(const Var& x) {
    const std::size_t H = x->value.dim(1), W = x->value.dim(2);
    return make_result(rfft2(x->value), {x}, "rfft2", [H, W](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        // d/dx of sum Re(conj(G) Y) is HW * irfft2(G / column_weight).
        Tensor G = self.grad;
        auto gc = as_complex(G.data());
        const std::size_t C = G.dim(0), Wh = W / 2 + 1;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t k = 0; k < Wh; ++k) gc[(c * H + r) * Wh + k] /= column_weight(k, W);
        Tensor gx = irfft2(G, H, W);
        Tensor& g = p.grad_buffer();
        const double hw = static_cast<double>(H * W);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += hw * gx[i];
    });
}

Var irfft2_node(const Var& s, std::size_t H, std::size_t W) {
    return make_result(irfft2(s->value, H, W), {s}, "irfft2", [H, W](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor G = rfft2(self.grad);
        auto gc = as_complex(G.data());
        auto pc = as_complex(p.grad_buffer().data());
        const std::size_t C = G.dim(0), Wh = W / 2 + 1;
        const double hw = static_cast<double>(H * W);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t k = 0; k < Wh; ++k) {
                    const std::size_t idx = (c * H + r) * Wh + k;
                    pc[idx] += gc[idx] * (column_weight(k, W) / hw);
                }
    });
}

Var truncate_node(const Var& s, std::size_t m1, std::size_t m2) {
    const std::size_t H = s->value.dim(1), Wh = s->value.dim(2);
    const std::size_t W = 2 * (Wh - 1);
    check_mode_cut(H, W, m1, m2);
    return make_result(truncate_tensor(s->value, H, Wh, m1, m2), {s}, "truncate_modes", [H, Wh](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor g = pad_tensor(self.grad, H, Wh);
        Tensor& pg = p.grad_buffer();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
    });
}

Var pad_node(const Var& s, std::size_t H, std::size_t W) {
    const std::size_t Wh = W / 2 + 1, m1 = s->value.dim(1) / 2, m2 = s->value.dim(2);
    check_mode_cut(H, W, m1, m2);
    return make_result(pad_tensor(s->value, H, Wh), {s}, "pad_modes", [H, Wh, m1, m2](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        Tensor g = truncate_tensor(self.grad, H, Wh, m1, m2);
        Tensor& pg = p.grad_buffer();
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[i];
    });
}

Var spectral_multiply_node(const Var& s, const SpectralKernel& R) {
    check_kernel(R);
    Tensor out = multiply_tensor(s->value, R.re->value, R.im->value, R);
    const std::size_t modes = 2 * R.m1 * R.m2, Ci = R.c_in, Co = R.c_out;
    return make_result(std::move(out), {s, R.re, R.im}, "spectral_multiply", [modes, Ci, Co](Node& self) {
        Node& sp = *self.parents[0];
        Node& rp = *self.parents[1];
        Node& ip = *self.parents[2];
        auto G = as_complex(std::span<const double>(self.grad.data()));
        auto sv = as_complex(std::span<const double>(sp.value.data()));
        const double* wr = rp.value.data().data();
        const double* wi = ip.value.data().data();
        if (sp.requires_grad) {
            auto gs = as_complex(sp.grad_buffer().data());
            for (std::size_t m = 0; m < modes; ++m)
                for (std::size_t i = 0; i < Ci; ++i) {
                    cplx acc = 0.0;
                    for (std::size_t o = 0; o < Co; ++o) {
                        const std::size_t w = (m * Ci + i) * Co + o;
                        acc += std::conj(cplx(wr[w], wi[w])) * G[o * modes + m];
                    }
                    gs[i * modes + m] += acc;
                }
        }
        if (rp.requires_grad || ip.requires_grad) {
            Tensor& gr = rp.grad_buffer();
            Tensor& gi = ip.grad_buffer();
            for (std::size_t m = 0; m < modes; ++m)
                for (std::size_t i = 0; i < Ci; ++i) {
                    const cplx sc = std::conj(sv[i * modes + m]);
                    for (std::size_t o = 0; o < Co; ++o) {
                        const cplx g = sc * G[o * modes + m];
                        const std::size_t w = (m * Ci + i) * Co + o;
                        gr[w] += g.real();
                        gi[w] += g.imag();
                    }
                }
        }
    });
}

Var fourier_unit(const Var& v, const SpectralKernel& R) {
    if (v->value.rank() != 3) throw std::invalid_argument("fourier_unit: expected [C, H, W]");
    const std::size_t H = v->value.dim(1), W = v->value.dim(2);
    check_mode_cut(H, W, R.m1, R.m2);
    Var s = rfft2_node(v);
    Var t = truncate_node(s, R.m1, R.m2);
    Var m = spectral_multiply_node(t, R);
    Var p = pad_node(m, H, W);
    return irfft2_node(p, H, W);
}

}  // namespace hafno::spectral
