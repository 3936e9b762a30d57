#include "hafno/diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

#include "hafno/spectral/fft.hpp"
#include "hafno/util/io.hpp"
#include "hafno/util/rng.hpp"

namespace hafno::diagnostics {

namespace {

using cplx = std::complex<double>;

void require_field(const Tensor& x, const char* what) {
    if (x.rank() != 3) throw std::invalid_argument(std::string(what) + ": expected [C,H,W], got " + shape_str(x.shape()));
}

std::size_t wrap(long i, std::size_t n) {
    const long m = static_cast<long>(n);
    return static_cast<std::size_t>(((i % m) + m) % m);
}

double relative_of(double err, double truth) {
    if (truth > 0.0) return std::sqrt(err / truth);
    return err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

Tensor random_field(const Shape& s, Rng& rng) {
    Tensor t(s);
    for (double& v : t.storage()) v = rng.normal();
    return t;
}

}  // namespace

std::size_t band_of(long k1, long k2, std::size_t H, std::size_t W, std::size_t n_bands) {
    const auto r = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(k1 * k1 + k2 * k2))));
    const std::size_t nyquist = std::min(H, W) / 2;
    return std::min(n_bands - 1, r * n_bands / nyquist);
}

double SpectralErrorReport::total_error_energy() const {
    double s = 0.0;
    for (double e : band_error_energy) s += e;
    return s;
}

double SpectralErrorReport::top_half_relative() const {
    double err = 0.0, truth = 0.0;
    for (std::size_t b = n_bands() / 2; b < n_bands(); ++b) {
        err += band_error_energy[b];
        truth += band_truth_energy[b];
    }
    return relative_of(err, truth);
}

SpectralErrorReport spectral_error_map(const Tensor& pred, const Tensor& truth, std::size_t n_bands) {
    require_field(pred, "spectral_error_map");
    if (pred.shape() != truth.shape()) {
        throw std::invalid_argument("spectral_error_map: shape " + shape_str(pred.shape()) + " vs " +
                                    shape_str(truth.shape()));
    }
    if (n_bands == 0) throw std::invalid_argument("spectral_error_map: n_bands must be positive");
    const std::size_t C = pred.dim(0), H = pred.dim(1), W = pred.dim(2), Wh = W / 2 + 1;
    if (std::min(H, W) < 2) throw std::invalid_argument("spectral_error_map: grid too small");

    Tensor diff = pred;
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= truth[i];
    const Tensor E = spectral::rfft2(diff);
    const Tensor T = spectral::rfft2(truth);
    const auto e = as_complex(E.storage());
    const auto t = as_complex(T.storage());

    SpectralErrorReport r;
    r.height = H;
    r.width = W;
    r.error_map = Tensor(Shape{H, Wh});
    r.band_error_energy.assign(n_bands, 0.0);
    r.band_truth_energy.assign(n_bands, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < Wh; ++w) {
            double err = 0.0, tr = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t k = (c * H + h) * Wh + w;
                err += std::norm(e[k]);
                tr += std::norm(t[k]);
            }
            r.error_map[h * Wh + w] = std::sqrt(err);
            const double mult = spectral::column_weight(w, W);
            const std::size_t b = band_of(spectral::signed_frequency(h, H), static_cast<long>(w), H, W, n_bands);
            r.band_error_energy[b] += mult * err;
            r.band_truth_energy[b] += mult * tr;
        }
    }
    r.band_relative.resize(n_bands);
    for (std::size_t b = 0; b < n_bands; ++b) r.band_relative[b] = relative_of(r.band_error_energy[b], r.band_truth_energy[b]);

    r.shifted_view = Tensor(Shape{H, W});
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t w = 0; w < W; ++w) {
            r.shifted_view[h * W + w] = w < Wh ? r.error_map[h * Wh + w] : r.error_map[wrap(-long(h), H) * Wh + (W - w)];
        }
    }
    return r;
}

SpectralErrorReport aggregate_reports(const std::vector<SpectralErrorReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
    SpectralErrorReport out = reports.front();
    for (std::size_t i = 1; i < reports.size(); ++i) {
        const auto& r = reports[i];
        if (r.n_bands() != out.n_bands()) throw std::invalid_argument("aggregate_reports: band counts differ");
        if (r.error_map.shape() != out.error_map.shape()) {
            throw std::invalid_argument("aggregate_reports: grids differ");
        }
        for (std::size_t b = 0; b < out.n_bands(); ++b) {
            out.band_error_energy[b] += r.band_error_energy[b];
            out.band_truth_energy[b] += r.band_truth_energy[b];
        }
        for (std::size_t k = 0; k < out.error_map.size(); ++k) {
            out.error_map[k] = std::hypot(out.error_map[k], r.error_map[k]);
        }
        for (std::size_t k = 0; k < out.shifted_view.size(); ++k) {
            out.shifted_view[k] = std::hypot(out.shifted_view[k], r.shifted_view[k]);
        }
    }
    for (std::size_t b = 0; b < out.n_bands(); ++b) {
        out.band_relative[b] = relative_of(out.band_error_energy[b], out.band_truth_energy[b]);
    }
    return out;
}

Deviation check_shift_equivariance(const FieldOp& op, const Tensor& x, long sh, long sw) {
    const Tensor lhs = op(cyclic_shift(x, sh, sw));
    const Tensor rhs = cyclic_shift(op(x), sh, sw);
    if (lhs.shape() != rhs.shape()) {
        throw std::invalid_argument("check_shift_equivariance: operator output shape depends on the shift");
    }
    Deviation d;
    d.max_abs = max_abs_diff(lhs, rhs);
    const double scale = max_abs(rhs);
    d.relative = scale > 0.0 ? d.max_abs / scale : d.max_abs;
    return d;
}

std::string to_string(GroupElement g) {
    switch (g) {
        case GroupElement::rot90: return "rot90";
        case GroupElement::flip_x: return "flip_x";
        case GroupElement::flip_y: return "flip_y";
    }
    return "?";
}

Tensor apply_group(GroupElement g, const Tensor& x) {
    require_field(x, "apply_group");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (g == GroupElement::rot90 && H != W) {
        throw std::invalid_argument("apply_group: rot90 needs a square grid, got " + shape_str(x.shape()));
    }
    Tensor y(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < H; ++i) {
            for (std::size_t j = 0; j < W; ++j) {
                switch (g) {
                    case GroupElement::rot90: y.at(c, i, j) = x.at(c, j, wrap(-long(i), H)); break;
                    case GroupElement::flip_x: y.at(c, i, j) = x.at(c, i, wrap(-long(j), W)); break;
                    case GroupElement::flip_y: y.at(c, i, j) = x.at(c, wrap(-long(i), H), j); break;
                }
            }
        }
    }
    return y;
}

double check_fourier_group_commutation(const Tensor& field, GroupElement g) {
    const Tensor y = apply_group(g, field);
    const std::size_t C = field.dim(0), H = field.dim(1), W = field.dim(2), Wh = W / 2 + 1;
    const Tensor X = spectral::rfft2(field);
    const Tensor Y = spectral::rfft2(y);
    const auto xs = as_complex(X.storage());
    const auto ys = as_complex(Y.storage());

    // Full-spectrum lookup through conjugate symmetry.
    auto full = [&](std::size_t c, long k1, long k2) {
        const std::size_t r = wrap(k1, H), q = wrap(k2, W);
        if (q < Wh) return xs[(c * H + r) * Wh + q];
        return std::conj(xs[(c * H + wrap(-k1, H)) * Wh + (W - q)]);
    };

    double dev = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t h = 0; h < H; ++h) {
            const long k1 = static_cast<long>(h);
            for (std::size_t w = 0; w < Wh; ++w) {
                const long k2 = static_cast<long>(w);
                cplx expected;
                switch (g) {
                    case GroupElement::rot90: expected = full(c, k2, -k1); break;
                    case GroupElement::flip_x: expected = full(c, k1, -k2); break;
                    case GroupElement::flip_y: expected = full(c, -k1, k2); break;
                }
                dev = std::max(dev, std::abs(ys[(c * H + h) * Wh + w] - expected));
            }
        }
    }
    return dev;
}

std::vector<EquivarianceEntry> model_equivariance_report(const model::HierarchicalModel& m, std::size_t side,
                                                         std::uint64_t seed, std::size_t draws) {
    const auto& cfg = m.config();
    cfg.check_grid(side, side);
    const std::size_t K = cfg.num_scales();
    const long coarse_step = 1L << (K - 1);
    Rng rng(seed, "equivariance");
    // Multiple of `period` in [0, n).
    auto draw_shift = [&](long period, std::size_t n) {
        return period * static_cast<long>(rng.uniform(0.0, static_cast<double>(static_cast<long>(n) / period)));
    };

    std::vector<EquivarianceEntry> out;
    NoGradGuard guard;
    for (std::size_t level = 1; level <= K; ++level) {
        const std::size_t n = side >> (level - 1);
        const Shape s{cfg.scales[level - 1].channels, n, n};
        FieldOp op = [&m, level](const Tensor& a) { return m.process_scale(level, constant(a))->value; };
        EquivarianceEntry e{"scale" + std::to_string(level) + " block", {}, 1e-10, false};
        for (std::size_t d = 0; d < draws; ++d) {
            const long sh = draw_shift(1, n), sw = -draw_shift(1, n);
            const Deviation dev = check_shift_equivariance(op, random_field(s, rng), sh, sw);
            e.deviation.max_abs = std::max(e.deviation.max_abs, dev.max_abs);
            e.deviation.relative = std::max(e.deviation.relative, dev.relative);
        }
        out.push_back(e);
    }
    {
        const Shape s{cfg.input_channels(), side, side};
        FieldOp op = [&m](const Tensor& x) { return m.network(constant(x))->value; };
        EquivarianceEntry e{"network, shifts = 0 mod " + std::to_string(coarse_step), {}, 1e-8, true};
        for (std::size_t d = 0; d < draws; ++d) {
            const Deviation dev =
                check_shift_equivariance(op, random_field(s, rng), draw_shift(coarse_step, side),
                                         -draw_shift(coarse_step, side));
            e.deviation.max_abs = std::max(e.deviation.max_abs, dev.max_abs);
            e.deviation.relative = std::max(e.deviation.relative, dev.relative);
        }
        out.push_back(e);
    }
    return out;
}

std::string equivariance_text(const std::vector<EquivarianceEntry>& entries) {
    std::ostringstream os;
    os << "check,max_abs,relative,tolerance,kind,passed\n";
    for (const auto& e : entries) {
        os << e.name << ',' << format_double(e.deviation.max_abs) << ',' << format_double(e.deviation.relative) << ','
           << format_double(e.tolerance) << ',' << (e.use_relative ? "relative" : "abs") << ','
           << (e.passed() ? "yes" : "no") << '\n';
    }
    return os.str();
}

std::string error_map_csv(const SpectralErrorReport& r) {
    std::ostringstream os;
    os << "mode_row,mode_col,error_mag\n";
    const std::size_t Wh = r.error_map.dim(1);
    for (std::size_t h = 0; h < r.height; ++h) {
        for (std::size_t w = 0; w < Wh; ++w) {
            os << spectral::signed_frequency(h, r.height) << ',' << w << ',' << format_double(r.error_map[h * Wh + w])
               << '\n';
        }
    }
    return os.str();
}

std::string band_csv(const SpectralErrorReport& r) {
    std::ostringstream os;
    os << "band,rel_error\n";
    for (std::size_t b = 0; b < r.n_bands(); ++b) os << b << ',' << format_double(r.band_relative[b]) << '\n';
    return os.str();
}

std::string pgm16(const Tensor& v) {
    std::size_t H = 0, W = 0;
    if (v.rank() == 2) {
        H = v.dim(0);
        W = v.dim(1);
    } else if (v.rank() == 3 && v.dim(0) == 1) {
        H = v.dim(1);
        W = v.dim(2);
    } else {
        throw std::invalid_argument("pgm16: expected [H,W] or [1,H,W], got " + shape_str(v.shape()));
    }
    std::vector<double> logv(v.size());
    double top = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        logv[i] = std::log1p(std::abs(v[i]));
        top = std::max(top, logv[i]);
    }
    std::string out = "P5\n" + std::to_string(W) + " " + std::to_string(H) + "\n65535\n";
    out.reserve(out.size() + 2 * v.size());
    for (double l : logv) {
        const auto q = static_cast<std::uint16_t>(top > 0.0 ? std::lround(65535.0 * l / top) : 0);
        out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xff));
    }
    return out;
}

}  // namespace hafno::diagnostics
