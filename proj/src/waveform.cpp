#include "nael/waveform.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nael/error.hpp"

namespace nael::waveform {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr std::array<std::string_view, kNumSchemes> kNames = {
    "LFM", "Costas", "Barker", "Frank", "P1", "P2", "P3", "P4", "T1", "T2", "T3", "T4",
};

double wrap_positive(double phase)
{
    double r = std::fmod(phase, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    // fmod of a tiny negative value can round up to exactly 2pi
    if (r >= kTwoPi) r = 0.0;
    return r;
}

void require(bool ok, const std::string& what)
{
    if (!ok) throw ParameterError(what);
}

}  // namespace

Scheme scheme_from_index(int index)
{
    if (index < 0 || index >= kNumSchemes)
        throw ParameterError("class index out of range: " + std::to_string(index));
    return static_cast<Scheme>(index);
}

std::string_view scheme_name(Scheme s) { return kNames.at(class_index(s)); }

std::optional<Scheme> scheme_from_name(std::string_view name)
{
    for (int i = 0; i < kNumSchemes; ++i)
        if (kNames[i] == name) return static_cast<Scheme>(i);
    return std::nullopt;
}

bool is_frequency_modulated(Scheme s) { return s == Scheme::LFM || s == Scheme::Costas; }

bool is_polyphase(Scheme s)
{
    switch (s) {
    case Scheme::Barker:
    case Scheme::Frank:
    case Scheme::P1:
    case Scheme::P2:
    case Scheme::P3:
    case Scheme::P4:
        return true;
    default:
        return false;
    }
}

bool is_polytime(Scheme s)
{
    return s == Scheme::T1 || s == Scheme::T2 || s == Scheme::T3 || s == Scheme::T4;
}

void validate(Scheme s, const WaveformParams& p, double fs)
{
    require(fs > 0.0, "sampling rate must be positive");
    require(p.amplitude > 0.0, "amplitude must be positive");
    require(std::isfinite(p.phi0), "initial phase must be finite");
    if (s != Scheme::Costas)
        require(p.fc > 0.0 && p.fc < fs / 2.0, "center frequency must lie in (0, fs/2)");

    switch (s) {
    case Scheme::LFM:
        require(p.bandwidth >= 0.0, "LFM bandwidth must be non-negative");
        break;
    case Scheme::Costas:
        require(p.hop_count == 4 || p.hop_count == 6, "Costas hop count must be 4 or 6");
        require(p.f_min > 0.0, "Costas f_min must be positive");
        require(p.f_hop > 0.0, "Costas f_hop must be positive");
        break;
    case Scheme::Barker:
        require(p.barker_length == 7 || p.barker_length == 11 || p.barker_length == 13,
                "Barker length must be 7, 11 or 13");
        require(p.samples_per_subcode >= 1, "N_sc must be at least 1");
        break;
    case Scheme::Frank:
    case Scheme::P1:
    case Scheme::P2:
        require(p.order >= 2, "polyphase order M must be at least 2");
        require(p.samples_per_subcode >= 1, "N_sc must be at least 1");
        break;
    case Scheme::P3:
    case Scheme::P4:
        require(p.code_length >= 1, "code length N_c must be at least 1");
        require(p.samples_per_subcode >= 1, "N_sc must be at least 1");
        break;
    case Scheme::T1:
    case Scheme::T2:
        require(p.segments >= 1, "segment count must be at least 1");
        require(p.n_states >= 2, "polytime codes need at least 2 phase states");
        break;
    case Scheme::T3:
    case Scheme::T4:
        require(p.poly_bandwidth > 0.0, "polytime bandwidth must be positive");
        require(p.n_states >= 2, "polytime codes need at least 2 phase states");
        break;
    }
}

std::vector<int> costas_sequence(int length)
{
    // Welch constructions; verified by the distinct-differences test.
    switch (length) {
    case 4:
        return {2, 4, 3, 1};
    case 6:
        return {3, 2, 6, 4, 5, 1};
    default:
        throw ParameterError("unsupported Costas length " + std::to_string(length));
    }
}

std::vector<int> barker_sequence(int length)
{
    switch (length) {
    case 7:
        return {+1, +1, +1, -1, -1, +1, -1};
    case 11:
        return {+1, +1, +1, -1, -1, -1, +1, -1, -1, +1, -1};
    case 13:
        return {+1, +1, +1, +1, +1, -1, -1, +1, +1, -1, +1, -1, +1};
    default:
        throw ParameterError("unsupported Barker length " + std::to_string(length));
    }
}

std::vector<double> phase_code(Scheme s, const WaveformParams& p)
{
    std::vector<double> phases;
    const double m = p.order;
    switch (s) {
    case Scheme::Barker:
        for (int chip : barker_sequence(p.barker_length)) phases.push_back(chip > 0 ? 0.0 : kPi);
        return phases;
    case Scheme::Frank:
    case Scheme::P1:
    case Scheme::P2:
        if (p.order < 2) throw ParameterError("polyphase order M must be at least 2");
        // j indexes the frequency group (outer), i the sample within it.
        for (int j = 1; j <= p.order; ++j) {
            for (int i = 1; i <= p.order; ++i) {
                double phi = 0.0;
                if (s == Scheme::Frank)
                    phi = kTwoPi * (i - 1) * (j - 1) / m;
                else if (s == Scheme::P1)
                    phi = -(kPi / m) * (m - (2 * j - 1)) * ((j - 1) * m + (i - 1));
                else
                    phi = -(kPi / (2 * m)) * (2 * i - 1 - m) * (2 * j - 1 - m);
                phases.push_back(std::fmod(phi, kTwoPi));
            }
        }
        return phases;
    case Scheme::P3:
    case Scheme::P4: {
        if (p.code_length < 1) throw ParameterError("code length N_c must be at least 1");
        const double nc = p.code_length;
        for (int i = 1; i <= p.code_length; ++i) {
            const double k = i - 1;
            double phi = kPi * k * k / nc;
            if (s == Scheme::P4) phi -= kPi * k;
            phases.push_back(std::fmod(phi, kTwoPi));
        }
        return phases;
    }
    default:
        throw ParameterError("phase_code: " + std::string(scheme_name(s)) +
                             " is not a per-subcode phase scheme");
    }
}

double polytime_phase(Scheme s, const WaveformParams& p, double t, double T)
{
    if (!is_polytime(s))
        throw ParameterError("polytime_phase: " + std::string(scheme_name(s)) +
                             " is not a polytime scheme");
    if (!(T > 0.0) || t < 0.0 || t >= T) throw ParameterError("polytime_phase: t outside [0, T)");
    const double n = p.n_states;
    const double u = t / T;  // normalized time in [0, 1)
    double level = 0.0;
    switch (s) {
    case Scheme::T1:
    case Scheme::T2: {
        const double k = p.segments;
        const double j = std::floor(k * u);
        const double local = k * u - j;  // (k t - j T) / T
        if (s == Scheme::T1)
            level = std::floor(local * j * n);
        else
            level = std::floor(local * (2.0 * j - k + 1.0) * n / 2.0);
        break;
    }
    case Scheme::T3:
    case Scheme::T4: {
        const double dft = p.poly_bandwidth * T;  // delta F * T, dimensionless
        double arg = n * dft * u * u / 2.0;
        if (s == Scheme::T4) arg -= n * dft * u / 2.0;
        level = std::floor(arg);
        break;
    }
    default:
        break;
    }
    return wrap_positive(kTwoPi / n * level);
}

IQSignal synthesize(Scheme s, const WaveformParams& p, std::size_t n, double fs)
{
    if (n == 0) throw ParameterError("synthesize: sample count must be positive");
    validate(s, p, fs);

    IQSignal out;
    out.fs = fs;
    out.samples.resize(n);
    const double a = p.amplitude;

    if (s == Scheme::LFM) {
        // Phase accumulation of f(m) = fc + B m / N, summed in closed form.
        const double slope = p.bandwidth / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = static_cast<double>(i);
            const double cycles = (p.fc * k + slope * k * (k - 1.0) / 2.0) / fs;
            out.samples[i] = std::polar(a, p.phi0 + kTwoPi * (cycles - std::floor(cycles)));
        }
        return out;
    }

    if (s == Scheme::Costas) {
        const auto code = costas_sequence(p.hop_count);
        const auto hops = static_cast<std::size_t>(p.hop_count);
        double cycles = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t hop = i * hops / n;
            out.samples[i] = std::polar(a, p.phi0 + kTwoPi * cycles);
            cycles += (p.f_min + (code[hop] - 1) * p.f_hop) / fs;
            cycles -= std::floor(cycles);
        }
        return out;
    }

    auto carrier = [&](std::size_t i) {
        const double cycles = p.fc * static_cast<double>(i) / fs;
        return kTwoPi * (cycles - std::floor(cycles));
    };

    if (is_polytime(s)) {
        const double T = static_cast<double>(n) / fs;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / fs;
            out.samples[i] = std::polar(a, p.phi0 + carrier(i) + polytime_phase(s, p, t, T));
        }
        return out;
    }

    // Polyphase: the code period is tiled cyclically over the n samples.
    const auto code = phase_code(s, p);
    const auto nsc = static_cast<std::size_t>(p.samples_per_subcode);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = code[(i / nsc) % code.size()];
        out.samples[i] = std::polar(a, p.phi0 + carrier(i) + phi);
    }
    return out;
}

IQSignal add_awgn(const IQSignal& signal, double snr_db, std::uint64_t seed, double amplitude)
{
    if (std::isinf(snr_db) && snr_db > 0.0) return signal;
    if (!std::isfinite(snr_db)) throw ParameterError("add_awgn: SNR must be finite or +inf");
    const double variance = amplitude * amplitude / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(variance / 2.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    IQSignal out = signal;
    for (auto& x : out.samples) {
        const double re = normal(rng);
        const double im = normal(rng);
        x += cplx(re, im);
    }
    return out;
}

IQSignal center_shift(const IQSignal& signal, double fc)
{
    const double offset = signal.fs / 2.0 - fc;
    if (offset == 0.0) return signal;
    IQSignal out = signal;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const double cycles = offset * static_cast<double>(i) / signal.fs;
        out.samples[i] *= std::polar(1.0, kTwoPi * (cycles - std::floor(cycles)));
    }
    return out;
}

double band_center(Scheme s, const WaveformParams& p)
{
    switch (s) {
    case Scheme::LFM:
        return p.fc + p.bandwidth / 2.0;
    case Scheme::Costas:
        return p.f_min + (p.hop_count - 1) * p.f_hop / 2.0;
    default:
        return p.fc;
    }
}

}  // namespace nael::waveform
