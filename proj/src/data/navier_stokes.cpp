#include "hafno/data/navier_stokes.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "hafno/error.hpp"
#include "hafno/spectral/fft.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::data {

using spectral::cplx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wavenumber tables for the real-FFT half spectrum of an n x n grid.
struct Modes {
    std::size_t n, wh;
    std::vector<double> k1, k2;    // angular wavenumbers, Nyquist zeroed (odd derivatives)
    std::vector<double> k_sq;      // |k|^2 with the true Nyquist values
    std::vector<bool> keep;        // 2/3-rule dealiasing mask

    explicit Modes(std::size_t n_) : n(n_), wh(n_ / 2 + 1) {
        k1.resize(n * wh);
        k2.resize(n * wh);
        k_sq.resize(n * wh);
        keep.resize(n * wh);
        const double cut = static_cast<double>(n) / 3.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < wh; ++c) {
                const std::size_t i = r * wh + c;
                const double f1 = static_cast<double>(spectral::signed_frequency(r, n));
                const double f2 = static_cast<double>(c);
                k_sq[i] = kTwoPi * kTwoPi * (f1 * f1 + f2 * f2);
                k1[i] = 2 * r == n ? 0.0 : kTwoPi * f1;
                k2[i] = 2 * c == n ? 0.0 : kTwoPi * f2;
                keep[i] = std::abs(f1) <= cut && f2 <= cut;
            }
    }
    std::size_t size() const { return n * wh; }
};

std::vector<cplx> to_spectrum(const Tensor& field) {
    Tensor s = spectral::rfft2(field);
    auto z = as_complex(std::span<const double>(s.data()));
    return std::vector<cplx>(z.begin(), z.end());
}

/// Velocity and vorticity gradient in physical space: channels u1, u2, w_x1, w_x2.
Tensor advection_fields(const std::vector<cplx>& w_hat, const Modes& m) {
    const std::size_t N = m.size();
    Tensor packed(Shape{4, m.n, m.wh, 2});
    auto z = as_complex(packed.data());
    const cplx I(0.0, 1.0);
    for (std::size_t i = 0; i < N; ++i) {
        const cplx psi = m.k_sq[i] > 0.0 ? w_hat[i] / m.k_sq[i] : cplx(0.0);
        z[i] = I * m.k2[i] * psi;
        z[N + i] = -I * m.k1[i] * psi;
        z[2 * N + i] = I * m.k1[i] * w_hat[i];
        z[3 * N + i] = I * m.k2[i] * w_hat[i];
    }
    return spectral::irfft2(packed, m.n, m.n);
}

/// Dealiased spectrum of u . grad w.
std::vector<cplx> nonlinear_term(const Tensor& fields, const Modes& m) {
    const std::size_t P = m.n * m.n;
    Tensor prod(Shape{1, m.n, m.n});
    for (std::size_t i = 0; i < P; ++i) prod[i] = fields[i] * fields[2 * P + i] + fields[P + i] * fields[3 * P + i];
    auto hat = to_spectrum(prod);
    for (std::size_t i = 0; i < hat.size(); ++i)
        if (!m.keep[i]) hat[i] = 0.0;
    return hat;
}

double max_speed(const Tensor& fields, std::size_t n) {
    double v = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) v = std::max(v, std::hypot(fields[i], fields[n * n + i]));
    return v;
}

bool is_dyadic(double x) {
    int e = 0;
    return x > 0.0 && std::frexp(x, &e) == 0.5;
}

void check_field(const Tensor& w, std::size_t n, const char* what) {
    if (w.rank() != 3 || w.dim(0) != 1 || w.dim(1) != n || w.dim(2) != n)
        throw std::invalid_argument(std::string(what) + " must be [1," + std::to_string(n) + "," + std::to_string(n) +
                                    "], got " + shape_str(w.shape()));
}

}  // namespace

Tensor ns_forcing(const NSSpec& spec) {
    const std::size_t n = spec.resolution;
    Tensor f(Shape{1, n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double s = kTwoPi * static_cast<double>(i + j) / static_cast<double>(n);
            f.at(0, i, j) = spec.forcing_amplitude * (std::sin(s) + std::cos(s));
        }
    return f;
}

Tensor solve_ns_vorticity(const Tensor& w0, const Tensor& forcing, const NSSpec& spec, NSDiagnostics* diag) {
    const std::size_t n = spec.resolution;
    if (!(spec.nu > 0.0)) throw std::invalid_argument("NS: viscosity must be positive");
    if (!spectral::is_power_of_two(n) || n < 8) throw std::invalid_argument("NS: resolution must be a power of two >= 8");
    if (!is_dyadic(spec.dt_max) || !is_dyadic(spec.dt_min) || spec.dt_min > spec.dt_max || spec.dt_max > 1.0)
        throw std::invalid_argument("NS: dt_max and dt_min must be powers of two with dt_min <= dt_max <= 1");
    if (!(spec.cfl > 0.0 && spec.cfl < 0.5)) throw std::invalid_argument("NS: CFL bound must lie in (0, 0.5)");
    check_field(w0, n, "NS initial vorticity");
    check_field(forcing, n, "NS forcing");

    const Modes m(n);
    const std::size_t N = m.size();
    const double h = 1.0 / static_cast<double>(n);
    std::vector<cplx> w_hat = to_spectrum(w0);
    const std::vector<cplx> f_hat = to_spectrum(forcing);

    Tensor frames(Shape{spec.frames, n, n});
    double dt = spec.dt_max;
    NSDiagnostics d;
    std::vector<cplx> w_pred(N);
    for (std::size_t frame = 0; frame < spec.frames; ++frame) {
        double remaining = 1.0;  // dyadic arithmetic: exact
        while (remaining > 0.0) {
            Tensor fields = advection_fields(w_hat, m);
            const double speed = max_speed(fields, n);
            while (dt * speed / h > spec.cfl) {
                dt *= 0.5;
                if (dt < spec.dt_min) {
                    std::ostringstream msg;
                    msg << "NS: CFL bound " << spec.cfl << " violated at dt floor " << spec.dt_min << " (max |u| "
                        << speed << ", t = " << static_cast<double>(frame) + 1.0 - remaining << ")";
                    throw Error(ErrorKind::generation, msg.str());
                }
            }
            if (dt > remaining) dt = remaining;
            d.max_cfl = std::max(d.max_cfl, dt * speed / h);

            const auto n1 = nonlinear_term(fields, m);
            for (std::size_t i = 0; i < N; ++i) {
                const double a = 0.5 * dt * spec.nu * m.k_sq[i];
                w_pred[i] = ((1.0 - a) * w_hat[i] + dt * (f_hat[i] - n1[i])) / (1.0 + a);
            }
            const auto n2 = nonlinear_term(advection_fields(w_pred, m), m);
            for (std::size_t i = 0; i < N; ++i) {
                const double a = 0.5 * dt * spec.nu * m.k_sq[i];
                const cplx F = f_hat[i] - 0.5 * (n1[i] + n2[i]);
                w_hat[i] = ((1.0 - a) * w_hat[i] + dt * F) / (1.0 + a);
            }
            remaining -= dt;
            ++d.steps;
        }
        Tensor packed(Shape{1, n, m.wh, 2});
        auto z = as_complex(packed.data());
        std::copy(w_hat.begin(), w_hat.end(), z.begin());
        Tensor w = spectral::irfft2(packed, n, n);
        if (!w.all_finite()) throw Error(ErrorKind::generation, "NS: non-finite vorticity at frame " + std::to_string(frame + 1));
        std::copy(w.data().begin(), w.data().end(), frames.data().begin() + static_cast<std::ptrdiff_t>(frame * n * n));
    }
    d.final_dt = dt;
    if (diag) *diag = d;
    return frames;
}

Tensor sample_periodic_grf(std::uint64_t seed, std::size_t n, const PeriodicGrfParams& p) {
    if (!spectral::is_power_of_two(n) || n < 4) throw std::invalid_argument("periodic GRF: n must be a power of two >= 4");
    Rng rng(seed, "periodic_grf");
    const std::size_t wh = n / 2 + 1;
    Tensor packed(Shape{1, n, wh, 2});
    auto z = as_complex(packed.data());
    const double half = static_cast<double>(n * n) / 2.0;
    auto amp = [&](long k1, long k2) {
        const double ksq = static_cast<double>(k1 * k1 + k2 * k2);
        return p.sigma * std::pow(kTwoPi * kTwoPi * ksq + p.tau * p.tau, -p.alpha / 2.0);
    };
    // Half-plane of modes strictly inside the Nyquist band; cos/sin pairs with iid normal weights.
    const long lim = static_cast<long>(n / 2);
    for (long k1 = -lim + 1; k1 < lim; ++k1)
        for (long k2 = 0; k2 < lim; ++k2) {
            if (k2 == 0 && k1 <= 0) continue;
            const double a = rng.normal(), b = rng.normal();
            const cplx value = half * amp(k1, k2) * cplx(a, -b);
            const std::size_t r = static_cast<std::size_t>((k1 + static_cast<long>(n)) % static_cast<long>(n));
            z[r * wh + static_cast<std::size_t>(k2)] = value;
            if (k2 == 0) z[((n - r) % n) * wh] = std::conj(value);
        }
    return spectral::irfft2(packed, n, n);
}

Tensor velocity_from_vorticity(const Tensor& w) {
    const std::size_t n = w.dim(1);
    const Modes m(n);
    Tensor fields = advection_fields(to_spectrum(w), m);
    Tensor out(Shape{2, n, n});
    std::copy(fields.data().begin(), fields.data().begin() + static_cast<std::ptrdiff_t>(2 * n * n), out.data().begin());
    return out;
}

double spectral_divergence(const Tensor& velocity) {
    const std::size_t n = velocity.dim(1);
    const Modes m(n);
    Tensor s = spectral::rfft2(velocity);
    auto z = as_complex(std::span<const double>(s.data()));
    Tensor div_hat(Shape{1, n, m.wh, 2});
    auto d = as_complex(div_hat.data());
    const cplx I(0.0, 1.0);
    for (std::size_t i = 0; i < m.size(); ++i) d[i] = I * m.k1[i] * z[i] + I * m.k2[i] * z[m.size() + i];
    return max_abs(spectral::irfft2(div_hat, n, n));
}

}  // namespace hafno::data
