#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "nael/waveform.hpp"

namespace nael::tfa {

// Discrete Choi-Williams settings. Lags span [-(lag_window-1)/2, (lag_window-1)/2]
// and the time smoothing spans [-(mu_window-1)/2, (mu_window-1)/2].
struct CWDConfig {
    double sigma = 1.0;
    int lag_window = 129;
    int mu_window = 65;
    int out_height = 128;
    int out_width = 128;

    void validate() const;
    // Length of the lag transform: the larger of out_height and the next
    // power of two holding every lag.
    int transform_length() const;
};

// Time-frequency image. values is row-major with row = frequency bin and
// column = time bin; frequency increases with the row index and the middle
// row holds fs/2.
struct TFI {
    int height = 0;
    int width = 0;
    std::vector<double> values;
    double fs = 0.0;
    bool normalized = false;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

TFI cwd(const waveform::IQSignal& signal, const CWDConfig& config = {});

// Literal nested-loop evaluation of the same discretization; O(N^2 L M) and
// limited to signals of at most 64 samples.
TFI cwd_reference(const waveform::IQSignal& signal, const CWDConfig& config);

inline constexpr std::size_t kReferenceMaxSamples = 64;

// Fractional output row at which a component of frequency f (Hz) appears.
// The lag product doubles frequencies, so the image spans [fs/4, 3fs/4).
double frequency_row(double f, double fs, int height);

// (x - mean) / std over the whole image.
TFI normalize_tfi(const TFI& tfi);

// Binary greyscale PGM (P5), min-max scaled to 0..255.
void write_pgm(std::ostream& out, const std::vector<double>& values, int height, int width);
void write_pgm(const std::string& path, const TFI& tfi);

}  // namespace nael::tfa
