#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hafno/core/tensor.hpp"
#include "hafno/model/model.hpp"

namespace hafno::diagnostics {

/// Per-mode error spectrum of pred - truth over [C,H,W] fields.
///
/// Modes are binned by integer radius r = floor(sqrt(k1^2 + k2^2)) of their signed
/// frequencies into band min(L-1, r*L / (min(H,W)/2)); radii at or past the Nyquist
/// radius land in the top band. Energies count every mode of the full spectrum once
/// (half-spectrum columns weighted by their conjugate multiplicity), so the band
/// error energies sum to H*W*||pred - truth||^2.
struct SpectralErrorReport {
    std::size_t height = 0;
    std::size_t width = 0;
    Tensor error_map;                        // [H, W/2+1], sqrt(sum_c |F(pred-truth)|^2)
    std::vector<double> band_error_energy;   // low -> high
    std::vector<double> band_truth_energy;
    std::vector<double> band_relative;       // sqrt(error / truth); 0 when both vanish
    /// Full [H,W] error magnitude in DFT index order: DC at the corners, the
    /// highest frequencies at the centre.
    Tensor shifted_view;

    std::size_t n_bands() const { return band_error_energy.size(); }
    double total_error_energy() const;
    /// sqrt(sum error / sum truth) over bands [L/2, L).
    double top_half_relative() const;
};

inline constexpr std::size_t kDefaultBands = 8;

SpectralErrorReport spectral_error_map(const Tensor& pred, const Tensor& truth, std::size_t n_bands = kDefaultBands);

/// Band energies summed over samples; relative errors recomputed from the sums.
SpectralErrorReport aggregate_reports(const std::vector<SpectralErrorReport>& reports);

std::size_t band_of(long k1, long k2, std::size_t H, std::size_t W, std::size_t n_bands);

struct Deviation {
    double max_abs = 0.0;
    double relative = 0.0;  // max_abs / max|reference|
};

using FieldOp = std::function<Tensor(const Tensor&)>;

/// max |op(shift(x, s)) - shift(op(x), s)| for the cyclic shift s = (sh, sw).
Deviation check_shift_equivariance(const FieldOp& op, const Tensor& x, long sh, long sw);

/// Exact lattice symmetries about index 0 on an N x N torus:
///   rot90:  y[i][j] = x[j][-i]
///   flip_x: y[i][j] = x[i][-j]
///   flip_y: y[i][j] = x[-i][j]
enum class GroupElement { rot90, flip_x, flip_y };

std::string to_string(GroupElement g);
Tensor apply_group(GroupElement g, const Tensor& x);

/// max |F(g.x)(k) - F(x)(A_g k)| over the half spectrum, with conjugate symmetry
/// supplying the coefficients whose mapped column falls outside it.
/// Throws std::invalid_argument for rot90 on a non-square grid.
double check_fourier_group_commutation(const Tensor& field, GroupElement g);

struct EquivarianceEntry {
    std::string name;
    Deviation deviation;
    double tolerance = 0.0;
    bool use_relative = false;

    bool passed() const { return (use_relative ? deviation.relative : deviation.max_abs) < tolerance; }
};

/// Shift checks on a model: every scale block under arbitrary shifts, and the
/// network under shifts that are multiples of 2^(K-1). Inputs are seeded.
std::vector<EquivarianceEntry> model_equivariance_report(const model::HierarchicalModel& m, std::size_t side,
                                                         std::uint64_t seed, std::size_t draws = 3);

std::string equivariance_text(const std::vector<EquivarianceEntry>& entries);

/// `mode_row,mode_col,error_mag` with signed row frequencies.
std::string error_map_csv(const SpectralErrorReport& r);
/// `band,rel_error`.
std::string band_csv(const SpectralErrorReport& r);

/// Binary 16-bit PGM (P5, big-endian) of log(1 + |v|) scaled to the full range. v is [H,W] or [1,H,W].
std::string pgm16(const Tensor& v);

}  // namespace hafno::diagnostics
