#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace nael::waveform {

using cplx = std::complex<double>;

// The twelve LPI modulation schemes. The enumerator value is the class index
// used by every network and file format.
enum class Scheme : std::uint8_t {
    LFM = 0,
    Costas,
    Barker,
    Frank,
    P1,
    P2,
    P3,
    P4,
    T1,
    T2,
    T3,
    T4,
};

inline constexpr int kNumSchemes = 12;

inline constexpr std::array<Scheme, kNumSchemes> kAllSchemes = {
    Scheme::LFM, Scheme::Costas, Scheme::Barker, Scheme::Frank, Scheme::P1, Scheme::P2,
    Scheme::P3,  Scheme::P4,     Scheme::T1,     Scheme::T2,    Scheme::T3, Scheme::T4,
};

constexpr int class_index(Scheme s) { return static_cast<int>(s); }
Scheme scheme_from_index(int index);
std::string_view scheme_name(Scheme s);
std::optional<Scheme> scheme_from_name(std::string_view name);

bool is_frequency_modulated(Scheme s);
bool is_polyphase(Scheme s);  // Barker, Frank, P1..P4
bool is_polytime(Scheme s);   // T1..T4

// Modulation parameters. Only the fields relevant to a scheme are consumed;
// frequencies are in Hz.
struct WaveformParams {
    double amplitude = 1.0;
    double phi0 = 0.0;
    double fc = 0.0;
    double bandwidth = 0.0;        // LFM sweep B
    double f_min = 0.0;            // Costas fundamental
    int hop_count = 4;             // Costas L_hs
    double f_hop = 0.0;            // Costas spacing
    int barker_length = 7;         // L_B
    int samples_per_subcode = 1;   // N_sc
    int order = 2;                 // M (Frank, P1, P2)
    int code_length = 1;           // N_c (P3, P4)
    int segments = 1;              // k (T1, T2)
    double poly_bandwidth = 0.0;   // delta F (T3, T4)
    int n_states = 2;              // polytime phase states
};

struct IQSignal {
    std::vector<cplx> samples;
    double fs = 0.0;
};

// Throws ParameterError when params are outside the admissible domain for s.
void validate(Scheme s, const WaveformParams& p, double fs);

std::vector<int> costas_sequence(int length);
std::vector<int> barker_sequence(int length);

// Per-subcode phases (rad) of a polyphase scheme, each reduced to (-2pi, 2pi).
std::vector<double> phase_code(Scheme s, const WaveformParams& p);

// Phase (rad, in [0, 2pi)) of a polytime code at time t within a pulse of
// duration T.
double polytime_phase(Scheme s, const WaveformParams& p, double t, double T);

// Noiseless complex envelope with constant modulus p.amplitude.
IQSignal synthesize(Scheme s, const WaveformParams& p, std::size_t n, double fs);

// Adds circular complex white Gaussian noise of variance A^2 / 10^(snr/10).
// An infinite snr_db returns the input unchanged.
IQSignal add_awgn(const IQSignal& signal, double snr_db, std::uint64_t seed,
                  double amplitude = 1.0);

// Mixes the signal so that frequency fc lands at fs/2.
IQSignal center_shift(const IQSignal& signal, double fc);

// Frequency the receiver aligns to the middle of the image: the band center
// for FM schemes, the carrier for phase-modulated ones.
double band_center(Scheme s, const WaveformParams& p);

}  // namespace nael::waveform
