#include "nael/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nael/binary_io.hpp"
#include "nael/error.hpp"
#include "nael/parallel.hpp"

namespace nael::dataset {

namespace {

using waveform::Scheme;

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

template <std::size_t N>
int pick(Rng& rng, const int (&set)[N])
{
    return set[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

constexpr int kBarkerLengths[] = {7, 11, 13};
constexpr int kBarkerSubcode[] = {20, 24, 28, 32};
constexpr int kPolyphaseSubcode[] = {5, 6, 7};
constexpr int kFrankOrders[] = {6, 7, 8};
constexpr int kP2Orders[] = {6, 8};
constexpr int kCodeLengths[] = {36, 49, 64};
constexpr int kSegments[] = {5, 6, 7};
constexpr int kHopCounts[] = {4, 6};

}  // namespace

void DatasetSpec::validate() const
{
    if (per_class == 0) throw ParameterError("dataset: per-class count must be positive");
    if (!(fs > 0.0)) throw ParameterError("dataset: fs must be positive");
    if (samples == 0) throw ParameterError("dataset: sample count must be positive");
    if (!(snr_low <= snr_high) || !std::isfinite(snr_low) || !std::isfinite(snr_high))
        throw ParameterError("dataset: SNR range needs finite low <= high");
    tfi.validate();
}

SampledParams sample_params(Scheme s, const DatasetSpec& spec, Rng& rng)
{
    const double fs = spec.fs;
    SampledParams out;
    auto& p = out.params;
    switch (s) {
    case Scheme::LFM:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.bandwidth = uniform(rng, fs / 20, fs / 8);
        break;
    case Scheme::Costas:
        p.f_min = uniform(rng, fs / 40, fs / 10);
        p.hop_count = pick(rng, kHopCounts);
        p.f_hop = uniform(rng, fs / 40, 3 * fs / 40);
        break;
    case Scheme::Barker:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.barker_length = pick(rng, kBarkerLengths);
        p.samples_per_subcode = pick(rng, kBarkerSubcode);
        break;
    case Scheme::Frank:
    case Scheme::P1:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.samples_per_subcode = pick(rng, kPolyphaseSubcode);
        p.order = pick(rng, kFrankOrders);
        break;
    case Scheme::P2:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.samples_per_subcode = pick(rng, kPolyphaseSubcode);
        p.order = pick(rng, kP2Orders);
        break;
    case Scheme::P3:
    case Scheme::P4:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.samples_per_subcode = pick(rng, kPolyphaseSubcode);
        p.code_length = pick(rng, kCodeLengths);
        break;
    case Scheme::T1:
    case Scheme::T2:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.segments = pick(rng, kSegments);
        break;
    case Scheme::T3:
    case Scheme::T4:
        p.fc = uniform(rng, fs / 8, fs / 4);
        p.poly_bandwidth = uniform(rng, fs / 20, fs / 10);
        break;
    }
    out.snr_db = spec.snr_low == spec.snr_high ? spec.snr_low : uniform(rng, spec.snr_low, spec.snr_high);
    return out;
}

ParamBlock param_block(Scheme s, const waveform::WaveformParams& p)
{
    auto f = [](double v) { return static_cast<float>(v); };
    switch (s) {
    case Scheme::LFM: return {f(p.fc), f(p.bandwidth)};
    case Scheme::Costas: return {f(p.f_min), f(p.hop_count), f(p.f_hop)};
    case Scheme::Barker: return {f(p.fc), f(p.barker_length), f(p.samples_per_subcode)};
    case Scheme::Frank:
    case Scheme::P1:
    case Scheme::P2: return {f(p.fc), f(p.samples_per_subcode), f(p.order)};
    case Scheme::P3:
    case Scheme::P4: return {f(p.fc), f(p.samples_per_subcode), f(p.code_length)};
    case Scheme::T1:
    case Scheme::T2: return {f(p.fc), f(p.segments), f(p.n_states)};
    case Scheme::T3:
    case Scheme::T4: return {f(p.fc), f(p.poly_bandwidth), f(p.n_states)};
    }
    return {};
}

std::array<std::size_t, waveform::kNumSchemes> Dataset::class_counts() const
{
    std::array<std::size_t, waveform::kNumSchemes> counts{};
    for (const auto& r : records) ++counts.at(static_cast<std::size_t>(r.class_index));
    return counts;
}

bool Dataset::operator==(const Dataset& o) const
{
    if (height != o.height || width != o.width || records.size() != o.records.size()) return false;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Record &a = records[i], &b = o.records[i];
        if (a.class_index != b.class_index || a.seed != b.seed || a.tfi.size() != b.tfi.size()) return false;
        if (std::bit_cast<std::uint32_t>(a.snr_db) != std::bit_cast<std::uint32_t>(b.snr_db)) return false;
        if (std::memcmp(a.params.data(), b.params.data(), sizeof(float) * kParamSlots) != 0) return false;
        if (std::memcmp(a.tfi.data(), b.tfi.data(), sizeof(float) * a.tfi.size()) != 0) return false;
    }
    return true;
}

std::uint64_t record_seed(std::uint64_t master, int class_index, std::size_t index)
{
    return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(class_index)) ^ index);
}

Record make_record(Scheme s, std::uint64_t seed, const DatasetSpec& spec)
{
    Rng rng(seed);
    return make_record(s, sample_params(s, spec, rng), seed, spec);
}

Record make_record(Scheme s, const SampledParams& sp, std::uint64_t seed, const DatasetSpec& spec)
{
    const auto clean = waveform::synthesize(s, sp.params, spec.samples, spec.fs);
    const auto noisy = waveform::add_awgn(clean, sp.snr_db, splitmix64(seed ^ 0x6e6f697365ULL), sp.params.amplitude);
    const auto centered = waveform::center_shift(noisy, waveform::band_center(s, sp.params));
    const tfa::TFI image = tfa::normalize_tfi(tfa::cwd(centered, spec.tfi));

    Record r;
    r.class_index = waveform::class_index(s);
    r.snr_db = static_cast<float>(sp.snr_db);
    r.seed = seed;
    r.params = param_block(s, sp.params);
    r.tfi.assign(image.values.begin(), image.values.end());
    return r;
}

tfa::TFI record_tfi(const Record& r, int height, int width, double fs)
{
    tfa::TFI t;
    t.height = height;
    t.width = width;
    t.fs = fs;
    t.values.assign(r.tfi.begin(), r.tfi.end());
    t.normalized = true;
    return t;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::uint64_t state = seed;
    for (std::size_t i = n; i > 1; --i) {
        state = splitmix64(state);
        // Multiply-shift bounded draw; bias is at most i / 2^64.
        const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(state) * i) >> 64);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Dataset generate_dataset(const DatasetSpec& spec)
{
    spec.validate();
    Dataset d;
    d.height = spec.tfi.out_height;
    d.width = spec.tfi.out_width;
    const std::size_t total = spec.per_class * waveform::kNumSchemes;
    std::vector<Record> ordered(total);
    parallel_for(total, [&](std::size_t i) {
        const auto cls = static_cast<int>(i / spec.per_class);
        const std::size_t index = i % spec.per_class;
        ordered[i] = make_record(waveform::scheme_from_index(cls), record_seed(spec.seed, cls, index), spec);
    });
    const auto order = permutation(total, splitmix64(spec.seed ^ 0x73687566ULL));
    d.records.reserve(total);
    for (std::size_t i : order) d.records.push_back(std::move(ordered[i]));
    return d;
}

void write_dataset(std::ostream& out, const Dataset& d)
{
    io::ByteWriter w(out);
    w.bytes(std::string_view(kDatasetMagic, 8));
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(d.records.size()));
    w.u32(static_cast<std::uint32_t>(d.height));
    w.u32(static_cast<std::uint32_t>(d.width));
    const std::size_t pixels = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
    for (const auto& r : d.records) {
        if (r.tfi.size() != pixels) throw ShapeError("dataset record TFI does not match the file dimensions");
        w.u8(static_cast<std::uint8_t>(r.class_index));
        w.f32(r.snr_db);
        w.u64(r.seed);
        for (float v : r.params) w.f32(v);
        w.bytes(std::string_view(reinterpret_cast<const char*>(r.tfi.data()), pixels * sizeof(float)));
    }
    w.check("dataset");
}

Dataset read_dataset(std::istream& in)
{
    io::ByteReader r(in);
    const std::string magic = r.bytes(8, "dataset magic");
    if (std::memcmp(magic.data(), kDatasetMagic, 8) != 0) throw FormatError("bad dataset magic", 0);
    const std::size_t version_at = r.offset();
    if (r.u32("version") != kDatasetVersion) throw FormatError("unsupported dataset version", version_at);
    const std::uint32_t count = r.u32("record count");
    Dataset d;
    const std::size_t dims_at = r.offset();
    d.height = static_cast<int>(r.u32("height"));
    d.width = static_cast<int>(r.u32("width"));
    if (d.height <= 0 || d.width <= 0 || d.height > 4096 || d.width > 4096)
        throw FormatError("implausible image dimensions", dims_at);
    const std::size_t pixels = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
    d.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Record rec;
        const std::size_t class_at = r.offset();
        rec.class_index = r.u8("class");
        if (rec.class_index >= waveform::kNumSchemes) throw FormatError("class index out of range", class_at);
        rec.snr_db = r.f32("snr");
        rec.seed = r.u64("seed");
        for (float& v : rec.params) v = r.f32("parameter block");
        const std::string raw = r.bytes(pixels * sizeof(float), "TFI");
        rec.tfi.resize(pixels);
        std::memcpy(rec.tfi.data(), raw.data(), raw.size());
        d.records.push_back(std::move(rec));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after dataset", r.offset());
    return d;
}

void save_dataset(const std::string& path, const Dataset& d)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    write_dataset(f, d);
}

Dataset load_dataset(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DependencyError("dataset file not found: " + path);
    return read_dataset(f);
}

std::vector<Dataset> split(const Dataset& d, std::span<const double> fractions, std::uint64_t seed)
{
    if (fractions.empty()) throw ParameterError("split: no fractions given");
    double total = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ParameterError("split: fractions must be non-negative");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split: fractions must sum to 1");

    std::vector<std::vector<std::size_t>> by_class(waveform::kNumSchemes);
    for (std::size_t i = 0; i < d.records.size(); ++i)
        by_class[static_cast<std::size_t>(d.records[i].class_index)].push_back(i);

    std::vector<std::vector<std::size_t>> parts(fractions.size());
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto& members = by_class[c];
        const auto order = permutation(members.size(), splitmix64(seed ^ (c + 1)));
        double cum = 0.0;
        std::size_t begin = 0;
        for (std::size_t p = 0; p < fractions.size(); ++p) {
            cum += fractions[p];
            const std::size_t end = p + 1 == fractions.size()
                                        ? members.size()
                                        : static_cast<std::size_t>(std::llround(cum * static_cast<double>(members.size())));
            for (std::size_t k = begin; k < std::max(begin, end); ++k) parts[p].push_back(members[order[k]]);
            begin = std::max(begin, end);
        }
    }
    std::vector<Dataset> out(fractions.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        std::sort(parts[p].begin(), parts[p].end());
        out[p].height = d.height;
        out[p].width = d.width;
        for (std::size_t i : parts[p]) out[p].records.push_back(d.records[i]);
    }
    return out;
}

nn::Tensor batch_tensor(const Dataset& d, std::span<const std::size_t> rows)
{
    const std::size_t pixels = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
    nn::Tensor t({rows.size(), 1, static_cast<std::size_t>(d.height), static_cast<std::size_t>(d.width)});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& src = d.records.at(rows[i]).tfi;
        std::copy(src.begin(), src.end(), t.data() + i * pixels);
    }
    return t;
}

std::vector<int> batch_labels(const Dataset& d, std::span<const std::size_t> rows)
{
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = d.records.at(rows[i]).class_index;
    return labels;
}

std::uint64_t file_hash(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DependencyError("cannot open " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace nael::dataset
