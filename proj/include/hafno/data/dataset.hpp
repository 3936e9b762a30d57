#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hafno/core/tensor.hpp"
#include "hafno/util/io.hpp"

namespace hafno::data {

inline constexpr char kDatasetMagic[4] = {'H', 'A', 'F', 'D'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr const char* kGeneratorVersion = "1";

enum class Benchmark { trig, darcy_rough, darcy_smooth, ns };

std::string to_string(Benchmark b);
/// Accepts "trig", "darcy-rough"/"darcy_rough", "darcy-smooth"/"darcy_smooth", "ns".
Benchmark parse_benchmark(const std::string& s);

/// Everything that determines a generated dataset. Round-trips through the manifest.
struct DatasetSpec {
    Benchmark benchmark = Benchmark::trig;
    std::string preset = "tiny";
    std::size_t resolution = 64;
    /// Elliptic reference grids use solve_factor * (resolution - 1) + 1 nodes so that
    /// every output node coincides with a solver node.
    std::size_t solve_factor = 2;
    std::size_t n_train = 64;
    std::size_t n_test = 16;
    std::uint64_t seed = 0;

    double grf_c = 9.0;
    double a_min = 3.0;
    double a_max = 12.0;
    std::size_t grf_modes = 32;
    double pcg_tol = 1e-8;

    double nu = 1e-3;
    std::size_t frames = 20;        // total recorded frames T
    std::size_t input_frames = 10;  // conditioning frames T0
    double dt_max = 1.0 / 128.0;
    double cfl = 0.25;
    double forcing_amplitude = 0.1;

    /// Swaps direction to (u + noise -> a) for elliptic benchmarks.
    bool inverse = false;
    double noise_eps = 0.0;

    std::size_t solve_resolution() const { return solve_factor * (resolution - 1) + 1; }
    void validate() const;
    KeyValues to_manifest() const;
    static DatasetSpec from_manifest(const KeyValues& kv);
};

/// "tiny" is the desk-scale tested path; "paper" mirrors the published sample counts.
DatasetSpec preset_spec(Benchmark b, const std::string& preset);

/// Elliptic: input a [1,n,n], target u [1,n,n] (swapped and noised when inverse).
/// NS: input frames 1..T0 [T0,n,n], target frames T0+1..T [T-T0,n,n].
struct Sample {
    Tensor input;
    Tensor target;
};

struct Dataset {
    KeyValues manifest;
    std::vector<Sample> samples;
};

struct DatasetSplits {
    Dataset train;
    Dataset test;
};

/// Per-sample generator seed; test sample i uses global index n_train + i.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t global_index);

Sample generate_sample(const DatasetSpec& spec, std::size_t global_index);

/// Generates both splits on up to `threads` workers; output is independent of the thread count.
DatasetSplits build_dataset(const DatasetSpec& spec, std::size_t threads = 1);

/// Layout: magic, u16 version, u32 length + manifest text, then u64 count and
/// (input, target) tensors. The manifest records count and the FNV-1a checksum
/// of everything after it.
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split);
void write_splits(const DatasetSplits& s, const std::filesystem::path& dir);
DatasetSplits read_splits(const std::filesystem::path& dir);

/// Manifest of `ds` parsed back into a spec.
DatasetSpec dataset_spec(const Dataset& ds);

/// One-step training pairs from NS trajectories: every window of T0 consecutive
/// frames maps to the frame after it.
Dataset trajectory_windows(const Dataset& ns);

}  // namespace hafno::data
