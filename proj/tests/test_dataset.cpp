#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "nael/dataset.hpp"
#include "nael/error.hpp"

using namespace nael::dataset;
using nael::waveform::Scheme;

namespace {

DatasetSpec small_spec(std::size_t per_class, std::uint64_t seed = 7)
{
    DatasetSpec s;
    s.per_class = per_class;
    s.seed = seed;
    return s;
}

std::string bytes_of(const Dataset& d)
{
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

}  // namespace

TEST_CASE("LFM parameter draws cover the table intervals")
{
    const DatasetSpec spec;
    const double fs = spec.fs;
    Rng rng(1);
    double lo = 1e300, hi = -1e300, blo = 1e300, bhi = -1e300, slo = 1e300, shi = -1e300;
    for (int i = 0; i < 100000; ++i) {
        const auto sp = sample_params(Scheme::LFM, spec, rng);
        lo = std::min(lo, sp.params.fc);
        hi = std::max(hi, sp.params.fc);
        blo = std::min(blo, sp.params.bandwidth);
        bhi = std::max(bhi, sp.params.bandwidth);
        slo = std::min(slo, sp.snr_db);
        shi = std::max(shi, sp.snr_db);
    }
    CHECK(lo >= fs / 8);
    CHECK(hi <= fs / 4);
    CHECK(lo <= fs / 8 * 1.005);
    CHECK(hi >= fs / 4 * 0.995);
    CHECK(blo >= fs / 20);
    CHECK(bhi <= fs / 8);
    CHECK(slo >= -15.0);
    CHECK(shi <= 5.0);
}

TEST_CASE("every sampled parameter lies inside its interval or set")
{
    const DatasetSpec spec;
    const double fs = spec.fs;
    Rng rng(2);
    std::set<int> p2_orders;
    for (Scheme s : nael::waveform::kAllSchemes) {
        for (int i = 0; i < 2000; ++i) {
            const auto sp = sample_params(s, spec, rng);
            const auto& p = sp.params;
            CHECK_NOTHROW(nael::waveform::validate(s, p, fs));
            CHECK((sp.snr_db >= -15.0 && sp.snr_db <= 5.0));
            const bool carrier_ok = p.fc >= fs / 8 && p.fc <= fs / 4;
            switch (s) {
            case Scheme::LFM: CHECK((carrier_ok && p.bandwidth >= fs / 20 && p.bandwidth <= fs / 8)); break;
            case Scheme::Costas:
                CHECK((p.f_min >= fs / 40 && p.f_min <= fs / 10));
                CHECK((p.hop_count == 4 || p.hop_count == 6));
                CHECK((p.f_hop >= fs / 40 && p.f_hop <= 3 * fs / 40));
                break;
            case Scheme::Barker:
                CHECK(carrier_ok);
                CHECK(std::set<int>{7, 11, 13}.count(p.barker_length) == 1);
                CHECK(std::set<int>{20, 24, 28, 32}.count(p.samples_per_subcode) == 1);
                break;
            case Scheme::Frank:
            case Scheme::P1:
                CHECK(carrier_ok);
                CHECK(std::set<int>{5, 6, 7}.count(p.samples_per_subcode) == 1);
                CHECK(std::set<int>{6, 7, 8}.count(p.order) == 1);
                break;
            case Scheme::P2:
                CHECK(carrier_ok);
                CHECK(std::set<int>{5, 6, 7}.count(p.samples_per_subcode) == 1);
                p2_orders.insert(p.order);
                break;
            case Scheme::P3:
            case Scheme::P4:
                CHECK(carrier_ok);
                CHECK(std::set<int>{5, 6, 7}.count(p.samples_per_subcode) == 1);
                CHECK(std::set<int>{36, 49, 64}.count(p.code_length) == 1);
                break;
            case Scheme::T1:
            case Scheme::T2:
                CHECK(carrier_ok);
                CHECK(std::set<int>{5, 6, 7}.count(p.segments) == 1);
                break;
            case Scheme::T3:
            case Scheme::T4:
                CHECK(carrier_ok);
                CHECK((p.poly_bandwidth >= fs / 20 && p.poly_bandwidth <= fs / 10));
                break;
            }
        }
    }
    CHECK(p2_orders == std::set<int>{6, 8});

    Rng a(3), b(3);
    for (int i = 0; i < 50; ++i) {
        const auto x = sample_params(Scheme::Costas, spec, a);
        const auto y = sample_params(Scheme::Costas, spec, b);
        CHECK(x.params.f_min == y.params.f_min);
        CHECK(x.params.f_hop == y.params.f_hop);
        CHECK(x.snr_db == y.snr_db);
    }
}

TEST_CASE("fixed SNR specs draw the fixed value")
{
    DatasetSpec spec;
    spec.snr_low = spec.snr_high = -4.0;
    Rng rng(4);
    for (Scheme s : nael::waveform::kAllSchemes) CHECK(sample_params(s, spec, rng).snr_db == -4.0);
    spec.snr_low = 1.0;
    CHECK_THROWS_AS(spec.validate(), nael::ParameterError);
}

TEST_CASE("dataset generation, persistence and splitting")
{
    const Dataset d = generate_dataset(small_spec(10));
    REQUIRE(d.size() == 120);
    for (std::size_t c : d.class_counts()) CHECK(c == 10);
    CHECK(d.height == 128);
    CHECK(d.width == 128);

    // Shuffled: the first dozen records are not all one class.
    std::set<int> head;
    for (std::size_t i = 0; i < 12; ++i) head.insert(d.records[i].class_index);
    CHECK(head.size() > 1);

    for (const auto& r : d.records) {
        double mean = 0, var = 0;
        for (float v : r.tfi) mean += v;
        mean /= static_cast<double>(r.tfi.size());
        for (float v : r.tfi) var += (v - mean) * (v - mean);
        var /= static_cast<double>(r.tfi.size());
        CHECK(std::abs(mean) < 1e-4);
        CHECK(std::abs(var - 1.0) < 1e-4);
        CHECK((r.snr_db >= -15.0f && r.snr_db <= 5.0f));
    }

    const std::string bytes = bytes_of(d);
    CHECK(bytes.size() == 24 + 120 * (1 + 4 + 8 + 32 + 128 * 128 * 4));
    CHECK(bytes_of(generate_dataset(small_spec(10))) == bytes);
    CHECK(bytes_of(generate_dataset(small_spec(10, 8))) != bytes);

    std::istringstream in(bytes);
    const Dataset loaded = read_dataset(in);
    CHECK(loaded == d);
    CHECK(bytes_of(loaded) == bytes);

    std::string corrupt = bytes;
    corrupt[0] = 'x';
    std::istringstream bad(corrupt);
    try {
        read_dataset(bad);
        FAIL("expected a format error");
    } catch (const nael::FormatError& e) {
        CHECK(e.offset() == 0);
    }
    std::istringstream truncated(bytes.substr(0, bytes.size() - 10));
    CHECK_THROWS_AS(read_dataset(truncated), nael::FormatError);
    std::string bad_class = bytes;
    bad_class[24] = static_cast<char>(12);
    std::istringstream bc(bad_class);
    try {
        read_dataset(bc);
        FAIL("expected a format error");
    } catch (const nael::FormatError& e) {
        CHECK(e.offset() == 24);
    }

    const std::vector<double> fractions{0.8, 0.2};
    const auto parts = split(d, fractions, 11);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 96);
    CHECK(parts[1].size() == 24);
    for (std::size_t c : parts[0].class_counts()) CHECK(c == 8);
    for (std::size_t c : parts[1].class_counts()) CHECK(c == 2);
    std::set<std::uint64_t> seeds;
    for (const auto& p : parts)
        for (const auto& r : p.records) seeds.insert(r.seed);
    CHECK(seeds.size() == 120);
    CHECK(split(d, fractions, 11)[1] == parts[1]);
    CHECK_FALSE(split(d, fractions, 12)[1] == parts[1]);
    const std::vector<double> bad_fractions{0.5, 0.2};
    CHECK_THROWS_AS(split(d, bad_fractions, 1), nael::ParameterError);

    const std::vector<std::size_t> rows{3, 0};
    const auto t = batch_tensor(d, rows);
    CHECK(t.shape() == nael::nn::Shape{2, 1, 128, 128});
    CHECK(t[0] == static_cast<double>(d.records[3].tfi[0]));
    CHECK(batch_labels(d, rows) == std::vector<int>{d.records[3].class_index, d.records[0].class_index});
}

TEST_CASE("record seeds and permutations")
{
    std::set<std::uint64_t> seeds;
    for (int c = 0; c < 12; ++c)
        for (std::size_t i = 0; i < 100; ++i) seeds.insert(record_seed(1, c, i));
    CHECK(seeds.size() == 1200);
    CHECK(record_seed(1, 2, 3) == record_seed(1, 2, 3));

    const auto p = permutation(1000, 5);
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
    CHECK(permutation(1000, 5) == p);
    CHECK(permutation(1000, 6) != p);

    const auto r = make_record(Scheme::P4, 99, DatasetSpec{});
    CHECK(r.class_index == nael::waveform::class_index(Scheme::P4));
    CHECK(r.params[0] > 0.0f);
    CHECK(r.params[3] == 0.0f);
}
