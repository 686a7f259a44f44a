#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>

#include "nael/dataset.hpp"
#include "nael/error.hpp"
#include "nael/evaluation.hpp"
#include "nael/nn/checkpoint.hpp"
#include "nael/parallel.hpp"
#include "nael/training.hpp"

namespace nael::cli {

namespace {

namespace fs = std::filesystem;
using waveform::Scheme;

double parse_number(std::string_view text, std::string_view what)
{
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end)
        throw ParameterError("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
    return v;
}

std::uint64_t default_seed()
{
    const char* env = std::getenv("NAEL_SEED");
    if (env == nullptr || *env == '\0') return 1;
    std::uint64_t v = 0;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec != std::errc() || ptr != end) throw ParameterError(std::string("NAEL_SEED is not an unsigned integer: ") + env);
    return v;
}

void load_stage(const std::string& dir, const char* stage, nn::Registry registry, const std::string& needed_by)
{
    const std::string path = evaluation::checkpoint_path(dir, stage);
    if (!fs::exists(path))
        throw DependencyError(needed_by + " needs the " + stage + " checkpoint, but " + path +
                              " does not exist; run `train " + stage + "` first");
    nn::load_checkpoint(path, registry);
}

void check_input_size(const dataset::Dataset& d, const model::NetworkConfig& config)
{
    if (d.height != config.input_size || d.width != config.input_size)
        throw CompatibilityError("dataset images are " + std::to_string(d.height) + "x" + std::to_string(d.width) +
                                 ", networks expect " + std::to_string(config.input_size) + "x" +
                                 std::to_string(config.input_size));
}

// Where a single input for infer/explain comes from.
struct SourceOptions {
    std::string data;
    std::size_t index = 0;
    std::string iq;
    std::string center;
    std::string scheme;
    std::string fs = "10e6";
    std::string snr;
    std::uint64_t seed = 0;
    std::string fc, bandwidth, f_min, f_hop, poly_bandwidth;
    int hops = 0, barker = 0, nsc = 0, order = 0, code_length = 0, segments = 0;
};

void add_source_options(CLI::App* cmd, SourceOptions& s)
{
    auto* data = cmd->add_option("--data", s.data, "Dataset file to read the record from");
    cmd->add_option("--index", s.index, "Record index within --data");
    auto* iq = cmd->add_option("--iq", s.iq, "Raw IQ file of interleaved little-endian float32 I/Q pairs");
    cmd->add_option("--center", s.center, "Frequency moved to the image middle for --iq input, e.g. fs/4");
    auto* scheme = cmd->add_option("--scheme", s.scheme, "Synthesize a signal of this scheme (LFM, Costas, ..., T4)");
    data->excludes(iq)->excludes(scheme);
    iq->excludes(scheme);
    cmd->add_option("--fs", s.fs, "Sampling rate in Hz");
    cmd->add_option("--snr", s.snr, "SNR in dB of the synthesized signal; sampled when omitted, inf for none");
    cmd->add_option("--seed", s.seed, "Seed for sampled parameters and noise");
    cmd->add_option("--fc", s.fc, "Carrier frequency, in Hz or fs-relative");
    cmd->add_option("--bandwidth", s.bandwidth, "LFM sweep bandwidth");
    cmd->add_option("--f-min", s.f_min, "Costas fundamental frequency");
    cmd->add_option("--f-hop", s.f_hop, "Costas hop spacing");
    cmd->add_option("--poly-bandwidth", s.poly_bandwidth, "T3/T4 bandwidth");
    cmd->add_option("--hops", s.hops, "Costas hop count");
    cmd->add_option("--barker", s.barker, "Barker code length");
    cmd->add_option("--nsc", s.nsc, "Samples per subcode");
    cmd->add_option("--order", s.order, "Frank/P1/P2 order");
    cmd->add_option("--code-length", s.code_length, "P3/P4 code length");
    cmd->add_option("--segments", s.segments, "T1/T2 segment count");
}

struct Input {
    tfa::TFI tfi;
    int actual = -1;  // unknown for raw IQ
    std::string description;
};

Input synthesized_input(const SourceOptions& s)
{
    const auto scheme = waveform::scheme_from_name(s.scheme);
    if (!scheme) throw ParameterError("unknown scheme '" + s.scheme + "'");
    dataset::DatasetSpec spec;
    spec.fs = parse_number(s.fs, "--fs");
    dataset::Rng rng(s.seed);
    dataset::SampledParams sp = dataset::sample_params(*scheme, spec, rng);
    auto& p = sp.params;
    const auto freq = [&](const std::string& text, double& field) {
        if (!text.empty()) field = parse_frequency(text, spec.fs);
    };
    freq(s.fc, p.fc);
    freq(s.bandwidth, p.bandwidth);
    freq(s.f_min, p.f_min);
    freq(s.f_hop, p.f_hop);
    freq(s.poly_bandwidth, p.poly_bandwidth);
    const auto count = [](int v, int& field) {
        if (v != 0) field = v;
    };
    count(s.hops, p.hop_count);
    count(s.barker, p.barker_length);
    count(s.nsc, p.samples_per_subcode);
    count(s.order, p.order);
    count(s.code_length, p.code_length);
    count(s.segments, p.segments);
    if (!s.snr.empty()) sp.snr_db = s.snr == "inf" ? INFINITY : parse_number(s.snr, "--snr");

    const dataset::Record r = dataset::make_record(*scheme, sp, s.seed, spec);
    std::ostringstream d;
    d << "synthesized " << waveform::scheme_name(*scheme) << " at " << sp.snr_db << " dB";
    return {dataset::record_tfi(r, spec.tfi.out_height, spec.tfi.out_width, spec.fs), r.class_index, d.str()};
}

Input iq_input(const SourceOptions& s)
{
    std::ifstream f(s.iq, std::ios::binary);
    if (!f) throw DependencyError("cannot open IQ file " + s.iq);
    const std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.empty() || bytes.size() % 8 != 0)
        throw FormatError("IQ file " + s.iq + " is not a whole number of float32 I/Q pairs", bytes.size() - bytes.size() % 8);
    waveform::IQSignal sig;
    sig.fs = parse_number(s.fs, "--fs");
    sig.samples.resize(bytes.size() / 8);
    for (std::size_t i = 0; i < sig.samples.size(); ++i) {
        float iq[2];
        std::memcpy(iq, bytes.data() + 8 * i, 8);
        if (!std::isfinite(iq[0]) || !std::isfinite(iq[1]))
            throw FormatError("IQ file " + s.iq + " holds a non-finite sample", 8 * i);
        sig.samples[i] = {iq[0], iq[1]};
    }
    if (!s.center.empty()) sig = waveform::center_shift(sig, parse_frequency(s.center, sig.fs));
    return {tfa::normalize_tfi(tfa::cwd(sig)), -1, "IQ file " + s.iq};
}

Input load_input(const SourceOptions& s)
{
    if (!s.scheme.empty()) return synthesized_input(s);
    if (!s.iq.empty()) return iq_input(s);
    if (s.data.empty()) throw ParameterError("give one of --data, --iq or --scheme");
    const dataset::Dataset d = dataset::load_dataset(s.data);
    if (s.index >= d.size())
        throw ParameterError("--index " + std::to_string(s.index) + " is past the " + std::to_string(d.size()) +
                             " records of " + s.data);
    const auto& r = d.records[s.index];
    return {dataset::record_tfi(r, d.height, d.width, parse_number(s.fs, "--fs")), r.class_index,
            "record " + std::to_string(s.index) + " of " + s.data};
}

std::string_view class_name(int c)
{
    return waveform::scheme_name(waveform::scheme_from_index(c));
}

// --- dataset gen ---------------------------------------------------------

struct DatasetGenOptions {
    std::size_t per_class = 500;
    std::uint64_t seed = 0;
    double snr_low = -15.0;
    double snr_high = 5.0;
    std::string snr;
    std::string fs = "10e6";
    std::size_t samples = 1024;
    std::string output;
};

int cmd_dataset_gen(const DatasetGenOptions& o, std::ostream& out)
{
    dataset::DatasetSpec spec;
    spec.per_class = o.per_class;
    spec.seed = o.seed;
    spec.snr_low = o.snr_low;
    spec.snr_high = o.snr_high;
    if (!o.snr.empty()) spec.snr_low = spec.snr_high = parse_number(o.snr, "--snr");
    spec.fs = parse_number(o.fs, "--fs");
    spec.samples = o.samples;
    spec.validate();
    const dataset::Dataset d = dataset::generate_dataset(spec);
    dataset::save_dataset(o.output, d);
    out << "wrote " << d.size() << " records to " << o.output << " (fnv1a64 " << std::hex << std::setw(16)
        << std::setfill('0') << dataset::file_hash(o.output) << std::dec << std::setfill(' ') << ")\n";
    return 0;
}

// --- train ---------------------------------------------------------------

struct TrainOptions {
    std::string network;
    std::string data;
    std::string dir;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

int cmd_train(const TrainOptions& o, std::ostream& out)
{
    const std::string who = "train " + o.network;
    model::NaelNetworks nets;
    // Prerequisites are checked before the dataset is read.
    if (o.network != "prn") load_stage(o.dir, "prn", nets.prn.registry(), who);
    const dataset::Dataset data = dataset::load_dataset(o.data);
    check_input_size(data, nets.config);

    training::Hyper hyper;
    hyper.epochs = o.epochs;
    hyper.batch_size = o.batch_size;
    hyper.learning_rate = o.learning_rate;
    hyper.seed = o.seed;
    hyper.on_row = [&](const training::HistoryRow& r) {
        out << o.network << " epoch " << r.epoch << " loss " << std::setprecision(6) << r.loss << " accuracy "
            << r.accuracy << " updates " << r.updates << '\n'
            << std::flush;
    };

    nn::Rng rng(o.seed);
    training::History history;
    nn::Registry registry;
    if (o.network == "prn") {
        nets.prn.init(rng);
        history = training::train_prn(nets.prn, data, hyper);
        registry = nets.prn.registry();
    } else if (o.network == "nan") {
        const training::MapDataset maps = training::label_nan_dataset(nets.prn, data);
        out << "gradient maps: " << maps.reliable << " reliable, " << maps.unreliable << " unreliable\n";
        nets.nan.init(rng);
        history = training::train_nan(nets.nan, maps, hyper);
        registry = nets.nan.registry();
    } else {
        nets.arn.init(rng);
        history = training::train_arn(nets.arn, nets.prn, data, hyper);
        registry = nets.arn.registry();
    }
    fs::create_directories(o.dir);
    const std::string ckpt = evaluation::checkpoint_path(o.dir, o.network);
    const std::string csv = (fs::path(o.dir) / (o.network + "_history.csv")).string();
    nn::save_checkpoint(ckpt, registry);
    history.write_csv(csv);
    out << "wrote " << ckpt << " and " << csv << '\n';
    return 0;
}

// --- eval ----------------------------------------------------------------

struct EvalOptions {
    std::string dir;
    std::string data;
    std::vector<double> snrs{-4.0, -15.0, -17.0};
    std::size_t per_class = 100;
    std::uint64_t seed = 0;
    std::string routing = "nan";
    std::string out_dir;
};

void print_report(std::ostream& out, const evaluation::ScenarioReport& r)
{
    out << std::fixed << std::setprecision(2);
    out << "snr " << r.snr_db << " dB: pcc " << r.pcc << "% (prn alone " << r.prn_pcc << "%, arn alone " << r.arn_pcc
        << "%), mean " << r.mean_mflops << " MFLOPs (prn " << r.prn_mflops << ", arn " << r.arn_mflops << "), arn "
        << r.arn_activations << "/" << r.samples << " (" << 100.0 * r.arn_rate << "%), " << r.runtime_seconds
        << " s\n";
    out << "  per-class accuracy:";
    for (std::size_t c = 0; c < evaluation::kClasses; ++c)
        out << ' ' << class_name(static_cast<int>(c)) << ' ' << 100.0 * r.class_accuracy[c] << '%';
    out << "\n  f_max on a center row: " << 100.0 * r.center_rate_correct() << "% of " << r.prn_correct
        << " correct prn decisions, " << 100.0 * r.center_rate_wrong() << "% of " << r.prn_wrong << " wrong\n";
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
}

int cmd_eval(const EvalOptions& o, std::ostream& out)
{
    model::Routing routing = model::Routing::nan;
    if (o.routing == "reliable") routing = model::Routing::always_reliable;
    if (o.routing == "unreliable") routing = model::Routing::always_unreliable;
    const model::NaelNetworks nets = evaluation::load_networks(o.dir);

    std::vector<evaluation::ScenarioReport> reports;
    if (!o.data.empty()) {
        const dataset::Dataset d = dataset::load_dataset(o.data);
        double snr = 0.0;
        for (const auto& r : d.records) snr += r.snr_db;
        if (d.size() > 0) snr /= static_cast<double>(d.size());
        reports.push_back(evaluation::evaluate(nets, d, snr, routing));
    } else {
        evaluation::SuiteSpec suite;
        suite.snrs = o.snrs;
        suite.per_class = o.per_class;
        suite.seed = o.seed;
        for (std::size_t i = 0; i < suite.snrs.size(); ++i)
            reports.push_back(evaluation::evaluate(
                nets, dataset::generate_dataset(evaluation::scenario_dataset_spec(suite, i)), suite.snrs[i], routing));
    }
    fs::create_directories(o.out_dir);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        print_report(out, reports[i]);
        reports[i].confusion.write_csv((fs::path(o.out_dir) / ("confusion_" + std::to_string(i) + ".csv")).string());
    }
    const std::string summary = (fs::path(o.out_dir) / "summary.csv").string();
    evaluation::write_summary_csv(summary, reports);
    out << "wrote " << summary << '\n';
    return 0;
}

// --- infer / explain -----------------------------------------------------

int cmd_infer(const std::string& dir, const SourceOptions& s, std::ostream& out)
{
    const model::NaelNetworks nets = evaluation::load_networks(dir);
    const Input in = load_input(s);
    const model::NaelDecision d = model::nael_infer(nets, in.tfi);
    out << in.description << '\n';
    out << "class: " << class_name(d.predicted_class) << '\n';
    out << "nan: " << (d.used_arn ? "unreliable" : "reliable") << " (p_reliable " << std::setprecision(4)
        << d.nan_probs[model::kReliable] << ")\n";
    out << "prn class: " << class_name(d.prn_class) << '\n';
    out << "arn: " << (d.used_arn ? std::string(class_name(d.arn_class)) : std::string("not run")) << '\n';
    out << "flops: " << d.flops_spent << '\n';
    if (in.actual >= 0) out << "actual: " << class_name(in.actual) << '\n';
    return 0;
}

int cmd_explain(const std::string& dir, const SourceOptions& s, const std::string& prefix, std::ostream& out)
{
    model::NaelNetworks nets;
    load_stage(dir, "prn", nets.prn.registry(), "explain");
    const Input in = load_input(s);
    model::Graph g;
    const auto pass = nets.prn.forward(g, g.constant(model::tfi_tensor(in.tfi)), model::Mode::infer, true);
    const std::vector<int> classes{model::argmax_row(pass.logits.value(), 0)};
    const model::GradientMap map =
        model::gradient_maps(pass.feature_map.value(), model::importance_weights(g, pass, classes), classes).front();

    const fs::path base(prefix);
    if (base.has_parent_path()) fs::create_directories(base.parent_path());
    const std::string csv = prefix + ".csv", pgm = prefix + ".pgm";
    {
        std::ofstream f(csv);
        if (!f) throw Error("cannot open " + csv + " for writing");
        model::write_map_csv(f, map);
    }
    {
        std::ofstream f(pgm, std::ios::binary);
        if (!f) throw Error("cannot open " + pgm + " for writing");
        model::write_map_pgm(f, map);
    }
    out << in.description << '\n';
    out << "prn class: " << class_name(map.class_index) << '\n';
    out << "f_max row: " << map.f_max << (model::is_center_row(map.f_max, map.height) ? " (center)" : " (off center)")
        << '\n';
    out << "wrote " << csv << " and " << pgm << '\n';
    return 0;
}

// --- flops ---------------------------------------------------------------

int cmd_flops(std::ostream& out)
{
    const model::NaelNetworks nets;
    const auto print = [&](const char* title, const nn::FlopsReport& r) {
        out << title << '\n';
        for (const auto& e : r.entries) out << "  " << e.name << ' ' << e.flops << '\n';
        out << "  total " << r.total() << '\n';
    };
    print("prn", nets.prn.flops());
    print("nan", nets.nan.flops());
    print("arn", nets.arn.flops());
    const model::CostModel cost = model::cost_model(nets);
    out << "gradient_map " << model::gradient_map_flops(nets.config) << '\n';
    out << "base " << cost.base << '\n';
    out << "marginal " << cost.marginal << '\n';
    out << "arn_standalone " << evaluation::standalone_arn_flops(nets) << '\n';
    return 0;
}

}  // namespace

double parse_frequency(std::string_view text, double fs)
{
    const std::size_t at = text.find("fs");
    if (at == std::string_view::npos) return parse_number(text, "frequency");
    std::string_view coef = text.substr(0, at);
    std::string_view rest = text.substr(at + 2);
    if (!coef.empty() && coef.back() == '*') coef.remove_suffix(1);
    const double num = coef.empty() ? 1.0 : parse_number(coef, "frequency coefficient");
    double den = 1.0;
    if (!rest.empty()) {
        if (rest.front() != '/') throw ParameterError("cannot parse frequency '" + std::string(text) + "'");
        den = parse_number(rest.substr(1), "frequency divisor");
        if (den == 0.0) throw ParameterError("frequency divisor is zero in '" + std::string(text) + "'");
    }
    return num * fs / den;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Noise-aware ensemble radar modulation recognizer"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker thread cap; results do not depend on it");

    std::uint64_t seed = 0;
    try {
        seed = default_seed();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    }

    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset utilities");
    dataset_cmd->require_subcommand(1);
    DatasetGenOptions gen;
    gen.seed = seed;
    auto* gen_cmd = dataset_cmd->add_subcommand("gen", "Generate a labeled time-frequency image dataset");
    gen_cmd->add_option("--per-class", gen.per_class, "Records per scheme")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Master seed (default: NAEL_SEED or 1)");
    gen_cmd->add_option("--snr-low", gen.snr_low, "Lower SNR bound in dB")->capture_default_str();
    gen_cmd->add_option("--snr-high", gen.snr_high, "Upper SNR bound in dB")->capture_default_str();
    gen_cmd->add_option("--snr", gen.snr, "Fixed SNR in dB; overrides the bounds");
    gen_cmd->add_option("--fs", gen.fs, "Sampling rate in Hz")->capture_default_str();
    gen_cmd->add_option("--samples", gen.samples, "Samples per signal")->capture_default_str();
    gen_cmd->add_option("-o,--output", gen.output, "Output dataset file")->required();

    TrainOptions train;
    train.seed = seed;
    auto* train_cmd = app.add_subcommand("train", "Train one network; nan and arn need a trained prn");
    train_cmd->add_option("network", train.network, "prn, nan or arn")
        ->required()
        ->check(CLI::IsMember({"prn", "nan", "arn"}));
    train_cmd->add_option("--data", train.data, "Training dataset file")->required();
    train_cmd->add_option("--dir", train.dir, "Checkpoint directory")->required();
    train_cmd->add_option("--epochs", train.epochs, "Epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--lr", train.learning_rate, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Initialization and shuffling seed (default: NAEL_SEED or 1)");

    EvalOptions eval;
    eval.seed = seed;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate NAEL on a dataset file or on fresh fixed-SNR test sets");
    eval_cmd->add_option("--dir", eval.dir, "Checkpoint directory")->required();
    eval_cmd->add_option("--data", eval.data, "Dataset file; otherwise fresh sets are generated per --snrs");
    eval_cmd->add_option("--snrs", eval.snrs, "Scenario SNRs in dB")->delimiter(',')->capture_default_str();
    eval_cmd->add_option("--per-class", eval.per_class, "Test records per scheme and scenario")->capture_default_str();
    eval_cmd->add_option("--seed", eval.seed, "Test set seed (default: NAEL_SEED or 1)");
    eval_cmd->add_option("--routing", eval.routing, "nan, reliable (PRN only) or unreliable (always ARN)")
        ->check(CLI::IsMember({"nan", "reliable", "unreliable"}))
        ->capture_default_str();
    eval_cmd->add_option("--out-dir", eval.out_dir, "Directory for summary.csv and confusion_<i>.csv")->required();

    std::string infer_dir;
    SourceOptions infer_src;
    infer_src.seed = seed;
    auto* infer_cmd = app.add_subcommand("infer", "Classify one record, raw IQ file or synthesized signal");
    infer_cmd->add_option("--dir", infer_dir, "Checkpoint directory")->required();
    add_source_options(infer_cmd, infer_src);

    std::string explain_dir, explain_prefix;
    SourceOptions explain_src;
    explain_src.seed = seed;
    auto* explain_cmd = app.add_subcommand("explain", "Write the PRN gradient map of one input as CSV and PGM");
    explain_cmd->add_option("--dir", explain_dir, "Checkpoint directory")->required();
    explain_cmd->add_option("-o,--output", explain_prefix, "Output prefix; writes <prefix>.csv and <prefix>.pgm")
        ->required();
    add_source_options(explain_cmd, explain_src);

    auto* flops_cmd = app.add_subcommand("flops", "Print the static FLOPs report of every network");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (threads > 0) set_max_threads(threads);
        if (gen_cmd->parsed()) return cmd_dataset_gen(gen, out);
        if (train_cmd->parsed()) return cmd_train(train, out);
        if (eval_cmd->parsed()) return cmd_eval(eval, out);
        if (infer_cmd->parsed()) return cmd_infer(infer_dir, infer_src, out);
        if (explain_cmd->parsed()) return cmd_explain(explain_dir, explain_src, explain_prefix, out);
        if (flops_cmd->parsed()) return cmd_flops(out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::usage);
}

}  // namespace nael::cli
