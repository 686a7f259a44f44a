#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "nael/error.hpp"
#include "nael/tfa.hpp"
#include "nael/waveform.hpp"

using namespace nael;
using waveform::cplx;
using waveform::IQSignal;

namespace {

constexpr double kFs = 10e6;

IQSignal random_signal(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    IQSignal s{std::vector<cplx>(n), kFs};
    for (auto& x : s.samples) x = {g(rng), g(rng)};
    return s;
}

tfa::CWDConfig toy_config()
{
    tfa::CWDConfig c;
    c.lag_window = 9;
    c.mu_window = 5;
    c.out_height = 8;
    c.out_width = 8;
    return c;
}

IQSignal tone(double f, std::size_t n)
{
    IQSignal s{std::vector<cplx>(n), kFs};
    for (std::size_t i = 0; i < n; ++i) s.samples[i] = std::polar(1.0, 2.0 * M_PI * f * static_cast<double>(i) / kFs);
    return s;
}

int column_argmax(const tfa::TFI& t, int col)
{
    int best = 0;
    for (int r = 1; r < t.height; ++r)
        if (t.at(r, col) > t.at(best, col)) best = r;
    return best;
}

}  // namespace

TEST_CASE("zero signal gives a zero image")
{
    IQSignal z{std::vector<cplx>(16), kFs};
    for (const auto& img : {tfa::cwd(z, toy_config()), tfa::cwd_reference(z, toy_config())}) {
        CHECK(img.height == 8);
        CHECK(img.width == 8);
        for (double v : img.values) CHECK(v == 0.0);
    }
    IQSignal z2{std::vector<cplx>(1024), kFs};
    for (double v : tfa::cwd(z2).values) CHECK(v == 0.0);
}

TEST_CASE("fast CWD equals the nested-loop reference")
{
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = random_signal(16, seed);
        const auto fast = tfa::cwd(s, toy_config());
        const auto ref = tfa::cwd_reference(s, toy_config());
        for (std::size_t i = 0; i < fast.values.size(); ++i)
            worst = std::max(worst, std::abs(fast.values[i] - ref.values[i]));
    }
    CHECK(worst < 1e-9);

    // a wider configuration with uneven decimation
    tfa::CWDConfig c;
    c.sigma = 0.5;
    c.lag_window = 15;
    c.mu_window = 7;
    c.out_height = 16;
    c.out_width = 8;
    const auto s = random_signal(40, 99);
    const auto fast = tfa::cwd(s, c);
    const auto ref = tfa::cwd_reference(s, c);
    for (std::size_t i = 0; i < fast.values.size(); ++i) CHECK(fast.values[i] == doctest::Approx(ref.values[i]).epsilon(1e-9));
}

TEST_CASE("reference guards its input size")
{
    tfa::CWDConfig c = toy_config();
    CHECK_THROWS_AS(tfa::cwd_reference(random_signal(128, 1), c), ShapeError);
    CHECK_THROWS_AS(tfa::cwd(random_signal(8, 1), c), ShapeError);
    c.lag_window = 8;
    CHECK_THROWS_AS(tfa::cwd(random_signal(16, 1), c), ParameterError);
    c = toy_config();
    c.out_height = 12;
    CHECK_THROWS_AS(tfa::cwd(random_signal(16, 1), c), ParameterError);
}

TEST_CASE("tone at fs/2 peaks on the center row")
{
    const auto s = waveform::center_shift(tone(1.3e6, 1024), 1.3e6);
    const auto img = tfa::cwd(s);
    REQUIRE(img.height == 128);
    REQUIRE(img.width == 128);
    for (int col = 8; col < 120; ++col) CHECK(column_argmax(img, col) == 64);
}

TEST_CASE("noisy tone is localized at its frequency row")
{
    for (double f0 : {3.2e6, 4.4e6, 5.0e6, 6.1e6}) {
        const auto s = waveform::add_awgn(tone(f0, 1024), 20.0, 3);
        const auto img = tfa::cwd(s);
        const double row = tfa::frequency_row(f0, kFs, img.height);
        int hits = 0, total = 0;
        for (int col = 8; col < 120; ++col, ++total)
            if (std::abs(column_argmax(img, col) + 0.5 - row) <= 1.5) ++hits;
        CHECK(hits >= 0.95 * total);
    }
}

TEST_CASE("raw image scales with signal energy")
{
    const auto s = random_signal(256, 4);
    auto scaled = s;
    for (auto& x : scaled.samples) x *= 3.0;
    tfa::CWDConfig c;
    c.lag_window = 33;
    c.mu_window = 17;
    c.out_height = 32;
    c.out_width = 32;
    const auto a = tfa::cwd(s, c);
    const auto b = tfa::cwd(scaled, c);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        CHECK(b.values[i] == doctest::Approx(9.0 * a.values[i]).epsilon(1e-9));
}

TEST_CASE("normalization")
{
    tfa::TFI flat;
    flat.height = 8;
    flat.width = 8;
    flat.values.assign(64, 2.5);
    CHECK_THROWS_AS(tfa::normalize_tfi(flat), NumericError);

    const auto img = tfa::cwd(random_signal(1024, 8));
    const auto n = tfa::normalize_tfi(img);
    CHECK(n.normalized);
    double mean = 0.0, var = 0.0;
    for (double v : n.values) mean += v;
    mean /= static_cast<double>(n.values.size());
    for (double v : n.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n.values.size());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);

    const auto twice = tfa::normalize_tfi(n);
    for (std::size_t i = 0; i < n.values.size(); ++i) CHECK(std::abs(twice.values[i] - n.values[i]) < 1e-5);
}

TEST_CASE("PGM export")
{
    std::ostringstream os;
    tfa::write_pgm(os, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0}, 2, 4);
    const std::string s = os.str();
    CHECK(s.rfind("P5\n4 2\n255\n", 0) == 0);
    REQUIRE(s.size() == 11 + 8);
    // top row of the picture is the last (highest-frequency) row
    CHECK(static_cast<unsigned char>(s[11]) == 146);
    CHECK(static_cast<unsigned char>(s[18]) == 109);
    CHECK(static_cast<unsigned char>(s[14]) == 255);
    CHECK(static_cast<unsigned char>(s[15]) == 0);
}
