#include "nael/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "nael/error.hpp"
#include "nael/nn/checkpoint.hpp"

namespace nael::evaluation {

namespace {

void check_class(int c, const char* what)
{
    if (c < 0 || c >= static_cast<int>(kClasses)) throw ParameterError(std::string(what) + " class index out of range");
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    return f;
}

double percent(std::size_t part, std::size_t whole)
{
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

void ConfusionMatrix::add(int predicted, int actual)
{
    check_class(predicted, "predicted");
    check_class(actual, "actual");
    ++counts[static_cast<std::size_t>(predicted)][static_cast<std::size_t>(actual)];
}

std::uint64_t ConfusionMatrix::total() const
{
    std::uint64_t t = 0;
    for (const auto& row : counts)
        for (std::uint64_t v : row) t += v;
    return t;
}

std::uint64_t ConfusionMatrix::trace() const
{
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < kClasses; ++i) t += counts[i][i];
    return t;
}

std::uint64_t ConfusionMatrix::column_sum(int actual) const
{
    check_class(actual, "actual");
    std::uint64_t t = 0;
    for (const auto& row : counts) t += row[static_cast<std::size_t>(actual)];
    return t;
}

double ConfusionMatrix::pcc() const
{
    return percent(trace(), total());
}

double ConfusionMatrix::class_accuracy(int actual) const
{
    const std::uint64_t n = column_sum(actual);
    const auto a = static_cast<std::size_t>(actual);
    return n == 0 ? 0.0 : static_cast<double>(counts[a][a]) / static_cast<double>(n);
}

void ConfusionMatrix::write_csv(std::ostream& out) const
{
    out << "predicted\\actual";
    for (auto s : waveform::kAllSchemes) out << ',' << waveform::scheme_name(s);
    out << '\n';
    for (std::size_t p = 0; p < kClasses; ++p) {
        out << waveform::scheme_name(waveform::kAllSchemes[p]);
        for (std::uint64_t v : counts[p]) out << ',' << v;
        out << '\n';
    }
}

void ConfusionMatrix::write_csv(const std::string& path) const
{
    auto f = open_out(path);
    write_csv(f);
}

double ScenarioReport::center_rate_correct() const
{
    return prn_correct == 0 ? 0.0 : static_cast<double>(prn_correct_center) / static_cast<double>(prn_correct);
}

double ScenarioReport::center_rate_wrong() const
{
    return prn_wrong == 0 ? 0.0 : static_cast<double>(prn_wrong_center) / static_cast<double>(prn_wrong);
}

std::uint64_t standalone_arn_flops(const model::NaelNetworks& nets)
{
    const nn::FlopsReport prn = nets.prn.flops();
    std::uint64_t total = nets.arn.flops().total();
    std::vector<std::string> prefixes{"prn.sc"};
    for (int s = 0; s <= nets.config.arn_reuse_point; ++s) prefixes.push_back("prn.stage" + std::to_string(s) + ".");
    for (const auto& e : prn.entries)
        for (const auto& p : prefixes)
            if (e.name.rfind(p, 0) == 0) {
                total += e.flops;
                break;
            }
    return total;
}

ScenarioReport evaluate(const model::NaelNetworks& nets, const dataset::Dataset& data, double snr_db,
                        model::Routing routing, std::size_t records_per_pass)
{
    if (records_per_pass == 0) throw ParameterError("evaluate: records_per_pass must be positive");
    if (data.height != nets.config.input_size || data.width != nets.config.input_size)
        throw CompatibilityError("evaluate: dataset images are " + std::to_string(data.height) + "x" +
                                 std::to_string(data.width) + ", networks expect " +
                                 std::to_string(nets.config.input_size));
    const auto start = std::chrono::steady_clock::now();
    ScenarioReport r;
    r.snr_db = snr_db;
    r.samples = data.size();
    ConfusionMatrix prn_confusion, arn_confusion;
    std::uint64_t flops_sum = 0;

    model::InferOptions options;
    options.routing = routing;
    options.arn_for_all = true;
    for (std::size_t begin = 0; begin < data.size(); begin += records_per_pass) {
        const std::size_t end = std::min(data.size(), begin + records_per_pass);
        std::vector<std::size_t> rows(end - begin);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
        const auto decisions = model::nael_infer(nets, dataset::batch_tensor(data, rows), options);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& d = decisions[i];
            const int actual = data.records[rows[i]].class_index;
            r.confusion.add(d.predicted_class, actual);
            prn_confusion.add(d.prn_class, actual);
            arn_confusion.add(d.arn_class, actual);
            flops_sum += d.flops_spent;
            r.arn_activations += d.used_arn;
            const bool center = model::is_center_row(d.map.f_max, d.map.height);
            if (d.prn_class == actual) {
                ++r.prn_correct;
                r.prn_correct_center += center;
            } else {
                ++r.prn_wrong;
                r.prn_wrong_center += center;
            }
        }
    }
    const double n = static_cast<double>(data.size());
    r.pcc = r.confusion.pcc();
    r.prn_pcc = prn_confusion.pcc();
    r.arn_pcc = arn_confusion.pcc();
    r.mean_mflops = data.size() == 0 ? 0.0 : static_cast<double>(flops_sum) / n / 1e6;
    r.arn_rate = data.size() == 0 ? 0.0 : static_cast<double>(r.arn_activations) / n;
    for (std::size_t c = 0; c < kClasses; ++c) r.class_accuracy[c] = r.confusion.class_accuracy(static_cast<int>(c));
    r.prn_mflops = static_cast<double>(nets.prn.flops().total()) / 1e6;
    r.arn_mflops = static_cast<double>(standalone_arn_flops(nets)) / 1e6;
    r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

double estimate_snr(double signal_plus_noise_power, double noise_power)
{
    if (!(noise_power > 0.0) || !(signal_plus_noise_power > 0.0))
        throw ParameterError("estimate_snr: powers must be positive");
    if (signal_plus_noise_power <= noise_power)
        throw NumericError("estimate_snr: received power does not exceed the noise power; SNR is undefined");
    return 10.0 * std::log10((signal_plus_noise_power - noise_power) / noise_power);
}

dataset::DatasetSpec scenario_dataset_spec(const SuiteSpec& suite, std::size_t i)
{
    if (i >= suite.snrs.size()) throw ParameterError("scenario index out of range");
    dataset::DatasetSpec spec;
    spec.per_class = suite.per_class;
    spec.snr_low = spec.snr_high = suite.snrs[i];
    spec.seed = suite.seed * 1000 + i + 1;
    return spec;
}

std::vector<ScenarioReport> scenario_suite(const model::NaelNetworks& nets, const SuiteSpec& suite)
{
    std::vector<ScenarioReport> reports;
    for (std::size_t i = 0; i < suite.snrs.size(); ++i) {
        const dataset::Dataset data = dataset::generate_dataset(scenario_dataset_spec(suite, i));
        reports.push_back(evaluate(nets, data, suite.snrs[i]));
    }
    return reports;
}

void write_summary_csv(std::ostream& out, std::span<const ScenarioReport> reports)
{
    const auto old = out.precision(10);
    out << "snr_db,pcc,mean_mflops,arn_rate\n";
    for (const auto& r : reports) out << r.snr_db << ',' << r.pcc << ',' << r.mean_mflops << ',' << r.arn_rate << '\n';
    out.precision(old);
}

void write_summary_csv(const std::string& path, std::span<const ScenarioReport> reports)
{
    auto f = open_out(path);
    write_summary_csv(f, reports);
}

bool non_increasing_within(std::span<const double> values, double tolerance, std::size_t max_inversions)
{
    std::size_t inversions = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double rise = values[i] - values[i - 1];
        if (rise <= 0.0) continue;
        if (rise > tolerance || ++inversions > max_inversions) return false;
    }
    return true;
}

std::string checkpoint_path(const std::string& dir, const std::string& stage)
{
    return (std::filesystem::path(dir) / (stage + ".ckpt")).string();
}

void save_networks(const std::string& dir, model::NaelNetworks& nets)
{
    std::filesystem::create_directories(dir);
    nn::save_checkpoint(checkpoint_path(dir, "prn"), nets.prn.registry());
    nn::save_checkpoint(checkpoint_path(dir, "nan"), nets.nan.registry());
    nn::save_checkpoint(checkpoint_path(dir, "arn"), nets.arn.registry());
}

model::NaelNetworks load_networks(const std::string& dir, const model::NetworkConfig& config)
{
    model::NaelNetworks nets(config);
    const auto load = [&](const char* stage, nn::Registry registry) {
        const std::string path = checkpoint_path(dir, stage);
        if (!std::filesystem::exists(path))
            throw DependencyError(std::string("missing ") + stage + " checkpoint " + path + "; train " + stage + " first");
        nn::load_checkpoint(path, registry);
    };
    load("prn", nets.prn.registry());
    load("nan", nets.nan.registry());
    load("arn", nets.arn.registry());
    return nets;
}

}  // namespace nael::evaluation
