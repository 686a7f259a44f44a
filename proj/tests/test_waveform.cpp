#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "nael/error.hpp"
#include "nael/waveform.hpp"
#include "oracles.hpp"

using namespace nael::waveform;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFs = 10e6;

// Hand-rolled parameter generator covering each scheme's admissible domain.
WaveformParams random_params(Scheme s, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto pick = [&](std::initializer_list<int> xs) {
        return *(xs.begin() + static_cast<std::size_t>(u(rng) * xs.size()) % xs.size());
    };
    WaveformParams p;
    p.fc = kFs * (0.05 + 0.4 * u(rng));
    p.bandwidth = kFs * 0.1 * u(rng);
    p.f_min = kFs * (0.02 + 0.08 * u(rng));
    p.f_hop = kFs * (0.02 + 0.06 * u(rng));
    p.hop_count = pick({4, 6});
    p.barker_length = pick({7, 11, 13});
    p.samples_per_subcode = pick({1, 5, 6, 7, 20, 32});
    p.order = pick({2, 3, 6, 7, 8});
    p.code_length = pick({4, 36, 49, 64});
    p.segments = pick({1, 5, 6, 7});
    p.poly_bandwidth = kFs * (0.05 + 0.05 * u(rng));
    (void)s;
    return p;
}

}  // namespace

TEST_CASE("scheme table is a bijection on 0..11")
{
    CHECK(kAllSchemes.size() == 12);
    for (int i = 0; i < kNumSchemes; ++i) {
        const Scheme s = scheme_from_index(i);
        CHECK(class_index(s) == i);
        CHECK(scheme_from_name(scheme_name(s)) == s);
    }
    CHECK_THROWS_AS(scheme_from_index(12), nael::ParameterError);
    CHECK(scheme_name(Scheme::Barker) == "Barker");
}

TEST_CASE("costas sequences")
{
    CHECK(costas_sequence(4) == std::vector<int>{2, 4, 3, 1});
    CHECK(costas_sequence(6) == std::vector<int>{3, 2, 6, 4, 5, 1});
    CHECK(oracle::costas_property(costas_sequence(4)));
    CHECK(oracle::costas_property(costas_sequence(6)));
    CHECK_FALSE(oracle::costas_property({1, 2, 3, 4}));  // oracle sanity: a ramp repeats differences
    CHECK_THROWS_AS(costas_sequence(5), nael::ParameterError);
}

TEST_CASE("barker sequences")
{
    CHECK(barker_sequence(7) == std::vector<int>{1, 1, 1, -1, -1, 1, -1});
    for (int len : {7, 11, 13}) {
        const auto r = oracle::autocorrelation(barker_sequence(len));
        CHECK(r[0] == len);
        for (std::size_t lag = 1; lag < r.size(); ++lag) CHECK(std::abs(r[lag]) <= 1);
    }
    CHECK_THROWS_AS(barker_sequence(5), nael::ParameterError);
}

TEST_CASE("phase codes")
{
    WaveformParams p;
    p.order = 2;
    const auto frank = phase_code(Scheme::Frank, p);
    REQUIRE(frank.size() == 4);
    CHECK(frank[0] == doctest::Approx(0.0));
    CHECK(frank[1] == doctest::Approx(0.0));
    CHECK(frank[2] == doctest::Approx(0.0));
    CHECK(frank[3] == doctest::Approx(kPi));

    p.code_length = 4;
    const auto p4 = phase_code(Scheme::P4, p);
    REQUIRE(p4.size() == 4);
    CHECK(p4[0] == doctest::Approx(0.0));
    CHECK(p4[1] == doctest::Approx(-3 * kPi / 4));
    CHECK(p4[2] == doctest::Approx(-kPi));
    CHECK(p4[3] == doctest::Approx(-3 * kPi / 4));

    p.barker_length = 7;
    const auto bpsk = phase_code(Scheme::Barker, p);
    const std::vector<double> expected{0, 0, 0, kPi, kPi, 0, kPi};
    REQUIRE(bpsk.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(bpsk[i] == doctest::Approx(expected[i]));

    p.order = 7;
    CHECK(phase_code(Scheme::P1, p).size() == 49);
    CHECK(phase_code(Scheme::P2, p).size() == 49);
    p.code_length = 36;
    CHECK(phase_code(Scheme::P3, p).size() == 36);
    for (Scheme s : {Scheme::Frank, Scheme::P1, Scheme::P2, Scheme::P3, Scheme::P4})
        for (double v : phase_code(s, p)) CHECK((v > -2 * kPi && v < 2 * kPi));

    CHECK_THROWS_AS(phase_code(Scheme::LFM, p), nael::ParameterError);
    CHECK_THROWS_AS(phase_code(Scheme::T1, p), nael::ParameterError);
}

TEST_CASE("polytime phases")
{
    WaveformParams p;
    p.segments = 5;
    p.n_states = 2;
    p.poly_bandwidth = 1e6;
    const double T = 1e-4;
    CHECK(polytime_phase(Scheme::T1, p, 0.0, T) == 0.0);
    CHECK(polytime_phase(Scheme::T3, p, 0.0, T) == 0.0);

    // dense sampling of T1 with 2 states visits exactly {0, pi}
    std::vector<double> phases;
    for (int i = 0; i < 20000; ++i) phases.push_back(polytime_phase(Scheme::T1, p, T * i / 20000.0, T));
    CHECK(oracle::distinct_on_circle(phases) == 2);
    CHECK(std::count(phases.begin(), phases.end(), 0.0) > 0);
    CHECK(std::count_if(phases.begin(), phases.end(), [](double v) { return std::abs(v - kPi) < 1e-12; }) > 0);

    for (Scheme s : {Scheme::T1, Scheme::T2, Scheme::T3, Scheme::T4})
        for (int i = 0; i < 1000; ++i) {
            const double v = polytime_phase(s, p, T * i / 1000.0, T);
            CHECK((v >= 0.0 && v < 2 * kPi));
        }
    CHECK_THROWS_AS(polytime_phase(Scheme::P1, p, 0.0, T), nael::ParameterError);
}

TEST_CASE("LFM with zero bandwidth is a pure tone")
{
    WaveformParams p;
    p.fc = 1.5e6;
    p.bandwidth = 0.0;
    const auto sig = synthesize(Scheme::LFM, p, 1024, kFs);
    const double expected = 2 * kPi * p.fc / kFs;
    for (std::size_t n = 1; n < sig.samples.size(); ++n) {
        double d = std::arg(sig.samples[n] * std::conj(sig.samples[n - 1]));
        CHECK(d == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("synthesis has constant modulus for every scheme")
{
    std::mt19937_64 rng(11);
    for (Scheme s : kAllSchemes) {
        for (int trial = 0; trial < 5; ++trial) {
            WaveformParams p = random_params(s, rng);
            p.amplitude = 1.0 + trial;
            const auto sig = synthesize(s, p, 1024, kFs);
            double worst = 0.0;
            for (const auto& x : sig.samples) worst = std::max(worst, std::abs(std::abs(x) - p.amplitude));
            CHECK(worst < 1e-12);
        }
    }
}

TEST_CASE("Barker signal demodulates to two phases switching on subcode boundaries")
{
    WaveformParams p;
    p.fc = 2e6;
    p.barker_length = 7;
    p.samples_per_subcode = 20;
    const auto sig = synthesize(Scheme::Barker, p, 1024, kFs);
    const auto phases = oracle::demodulate(sig.samples, p.fc, kFs);
    CHECK(oracle::distinct_on_circle(phases, 1e-6) == 2);
    for (double ph : phases) {
        const bool zero = std::min(ph, 2 * kPi - ph) < 1e-6;
        const bool pi = std::abs(ph - kPi) < 1e-6;
        CHECK((zero || pi));
    }
    for (std::size_t n = 1; n < 140; ++n) {
        const double jump = std::abs(std::remainder(phases[n] - phases[n - 1], 2 * kPi));
        if (jump > 1e-6) CHECK(n % 20 == 0);
    }
}

TEST_CASE("phase-state cardinality")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        WaveformParams p = random_params(Scheme::Frank, rng);
        const auto frank = synthesize(Scheme::Frank, p, 1024, kFs);
        // Frank phases are multiples of 2pi/M, so at most M values mod 2pi
        CHECK(oracle::distinct_on_circle(oracle::demodulate(frank.samples, p.fc, kFs), 1e-6) <=
              static_cast<std::size_t>(p.order));
        for (Scheme s : {Scheme::T1, Scheme::T2, Scheme::T3, Scheme::T4}) {
            const auto sig = synthesize(s, p, 1024, kFs);
            CHECK(oracle::distinct_on_circle(oracle::demodulate(sig.samples, p.fc, kFs), 1e-6) <=
                  static_cast<std::size_t>(p.n_states));
        }
    }
}

TEST_CASE("parameter validation")
{
    WaveformParams p;
    p.fc = 6e6;  // above fs/2
    CHECK_THROWS_AS(synthesize(Scheme::P1, p, 1024, kFs), nael::ParameterError);
    p.fc = 1e6;
    p.amplitude = 0.0;
    CHECK_THROWS_AS(synthesize(Scheme::P1, p, 1024, kFs), nael::ParameterError);
    p.amplitude = 1.0;
    CHECK_THROWS_AS(synthesize(Scheme::P1, p, 0, kFs), nael::ParameterError);
    p.hop_count = 5;
    p.f_min = 1e6;
    p.f_hop = 1e5;
    CHECK_THROWS_AS(synthesize(Scheme::Costas, p, 1024, kFs), nael::ParameterError);
}

TEST_CASE("AWGN")
{
    WaveformParams p;
    p.fc = 1e6;
    const auto clean = synthesize(Scheme::LFM, p, 4096, kFs);

    const auto same = add_awgn(clean, std::numeric_limits<double>::infinity(), 1);
    CHECK(same.samples == clean.samples);

    const auto a = add_awgn(clean, -3.0, 42);
    const auto b = add_awgn(clean, -3.0, 42);
    CHECK(a.samples == b.samples);
    CHECK(add_awgn(clean, -3.0, 43).samples != a.samples);

    IQSignal zero{std::vector<cplx>(1000000), kFs};
    const auto noise = add_awgn(zero, 0.0, 7);
    double power = 0.0;
    for (const auto& x : noise.samples) power += std::norm(x);
    power /= static_cast<double>(noise.samples.size());
    CHECK(power >= 0.99);
    CHECK(power <= 1.01);
}

TEST_CASE("center shift moves the carrier to fs/2")
{
    const std::size_t n = 256;
    WaveformParams p;
    p.fc = kFs * 37.0 / n;  // bin-aligned tone
    const auto tone = synthesize(Scheme::LFM, p, n, kFs);
    const auto shifted = center_shift(tone, p.fc);
    CHECK(oracle::argmax_abs(oracle::naive_dft(shifted.samples)) == n / 2);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(std::abs(shifted.samples[i]) - std::abs(tone.samples[i])) < 1e-15);

    CHECK(center_shift(tone, kFs / 2).samples == tone.samples);
}

TEST_CASE("band centers")
{
    WaveformParams p;
    p.fc = 1e6;
    p.bandwidth = 4e5;
    CHECK(band_center(Scheme::LFM, p) == doctest::Approx(1.2e6));
    p.f_min = 5e5;
    p.f_hop = 2e5;
    p.hop_count = 6;
    CHECK(band_center(Scheme::Costas, p) == doctest::Approx(1e6));
    CHECK(band_center(Scheme::P3, p) == 1e6);
}
