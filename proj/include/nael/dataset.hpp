#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nael/nn/tensor.hpp"
#include "nael/tfa.hpp"
#include "nael/waveform.hpp"

namespace nael::dataset {

using Rng = std::mt19937_64;

struct DatasetSpec {
    std::size_t per_class = 500;
    double fs = 10e6;
    std::size_t samples = 1024;
    // Equal bounds give a fixed-SNR set.
    double snr_low = -15.0;
    double snr_high = 5.0;
    std::uint64_t seed = 1;
    tfa::CWDConfig tfi;

    void validate() const;
};

struct SampledParams {
    waveform::WaveformParams params;
    double snr_db = 0.0;
};

// Draws waveform parameters and an SNR for one signal. Continuous values
// are uniform over fs-relative intervals, discrete values uniform over
// their sets.
SampledParams sample_params(waveform::Scheme s, const DatasetSpec& spec, Rng& rng);

inline constexpr std::size_t kParamSlots = 8;
using ParamBlock = std::array<float, kParamSlots>;

// Fixed 8-slot summary of the scheme-relevant parameters; unused slots are 0.
//   LFM          fc, B
//   Costas       f_min, L_hs, f_hop
//   Barker       fc, L_B, N_sc
//   Frank/P1/P2  fc, N_sc, M
//   P3/P4        fc, N_sc, N_c
//   T1/T2        fc, k, n_states
//   T3/T4        fc, dF, n_states
ParamBlock param_block(waveform::Scheme s, const waveform::WaveformParams& p);

struct Record {
    int class_index = 0;
    float snr_db = 0.0f;
    std::uint64_t seed = 0;
    ParamBlock params{};
    std::vector<float> tfi;  // row-major, height x width
};

struct Dataset {
    int height = 0;
    int width = 0;
    std::vector<Record> records;

    std::size_t size() const noexcept { return records.size(); }
    std::array<std::size_t, waveform::kNumSchemes> class_counts() const;
    bool operator==(const Dataset&) const;
};

// Seed of record `index` of `scheme` under a master seed.
std::uint64_t record_seed(std::uint64_t master, int class_index, std::size_t index);

// Full per-record pipeline: sample, synthesize, add noise, center the band,
// transform and normalize.
Record make_record(waveform::Scheme s, std::uint64_t seed, const DatasetSpec& spec);
// Same pipeline with explicit parameters; seed drives the noise only.
Record make_record(waveform::Scheme s, const SampledParams& sp, std::uint64_t seed, const DatasetSpec& spec);
tfa::TFI record_tfi(const Record& r, int height, int width, double fs);

Dataset generate_dataset(const DatasetSpec& spec);

inline constexpr char kDatasetMagic[8] = {'N', 'A', 'E', 'L', 'D', 'S', '1', '\0'};
inline constexpr std::uint32_t kDatasetVersion = 1;

void write_dataset(std::ostream& out, const Dataset& d);
Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

// Stratified split: each class is shuffled under seed and cut at the
// cumulative fractions. Partitions keep the input record order.
std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions, std::uint64_t seed);

// [N, 1, H, W] tensor of the selected records.
nn::Tensor batch_tensor(const Dataset& d, std::span<const std::size_t> rows);
std::vector<int> batch_labels(const Dataset& d, std::span<const std::size_t> rows);

// Deterministic Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

// 64-bit FNV-1a of a file, for reporting.
std::uint64_t file_hash(const std::string& path);

}  // namespace nael::dataset
