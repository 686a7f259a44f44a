#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nael/dataset.hpp"
#include "nael/model.hpp"

namespace nael::evaluation {

inline constexpr std::size_t kClasses = waveform::kNumSchemes;

// counts[predicted][actual].
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, kClasses>, kClasses> counts{};

    void add(int predicted, int actual);
    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t column_sum(int actual) const;
    // Percent; 0 for an empty matrix.
    double pcc() const;
    // Fraction of class c samples recognized as c.
    double class_accuracy(int actual) const;

    // 13x13: a header row and a header column of scheme names.
    void write_csv(std::ostream& out) const;
    void write_csv(const std::string& path) const;
};

struct ScenarioReport {
    double snr_db = 0.0;
    std::size_t samples = 0;
    ConfusionMatrix confusion;
    double pcc = 0.0;  // percent
    double mean_mflops = 0.0;
    std::size_t arn_activations = 0;
    double arn_rate = 0.0;
    std::array<double, kClasses> class_accuracy{};
    double runtime_seconds = 0.0;

    // Baselines evaluated on the same inputs.
    double prn_pcc = 0.0;
    double arn_pcc = 0.0;
    double prn_mflops = 0.0;
    double arn_mflops = 0.0;  // ARN as a standalone recognizer

    // Center-row f_max counts split by PRN correctness.
    std::size_t prn_correct = 0;
    std::size_t prn_correct_center = 0;
    std::size_t prn_wrong = 0;
    std::size_t prn_wrong_center = 0;

    double center_rate_correct() const;
    double center_rate_wrong() const;
};

// Cost of classifying with ARN alone: the PRN layers it reuses plus ARN.
std::uint64_t standalone_arn_flops(const model::NaelNetworks& nets);

// Runs nael_infer over every record. records_per_pass bounds memory.
ScenarioReport evaluate(const model::NaelNetworks& nets, const dataset::Dataset& data, double snr_db = 0.0,
                        model::Routing routing = model::Routing::nan, std::size_t records_per_pass = 256);

// 10 log10((Py - Pn) / Pn).
double estimate_snr(double signal_plus_noise_power, double noise_power);

struct SuiteSpec {
    std::vector<double> snrs{-4.0, -15.0, -17.0};
    std::size_t per_class = 100;
    std::uint64_t seed = 1;
};

// Fresh test set for scenario i of a suite.
dataset::DatasetSpec scenario_dataset_spec(const SuiteSpec& suite, std::size_t i);
std::vector<ScenarioReport> scenario_suite(const model::NaelNetworks& nets, const SuiteSpec& suite);

// snr_db,pcc,mean_mflops,arn_rate
void write_summary_csv(std::ostream& out, std::span<const ScenarioReport> reports);
void write_summary_csv(const std::string& path, std::span<const ScenarioReport> reports);

// True when values, ordered by increasing SNR, never increase except for at
// most max_inversions steps that each rise by no more than tolerance.
bool non_increasing_within(std::span<const double> values, double tolerance, std::size_t max_inversions);

// Checkpoints live as <dir>/prn.ckpt, <dir>/nan.ckpt and <dir>/arn.ckpt.
std::string checkpoint_path(const std::string& dir, const std::string& stage);
void save_networks(const std::string& dir, model::NaelNetworks& nets);
// Missing files raise DependencyError naming the stage.
model::NaelNetworks load_networks(const std::string& dir, const model::NetworkConfig& config = {});

}  // namespace nael::evaluation
