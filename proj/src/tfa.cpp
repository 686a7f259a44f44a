#include "nael/tfa.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <ostream>

#include "nael/error.hpp"

namespace nael::tfa {

using waveform::cplx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Smoothing weights g(mu, tau) for tau = 0..half_lag, each row normalized to
// unit sum over the mu window. Row-major [tau][mu + half_mu].
std::vector<double> kernel_table(const CWDConfig& c)
{
    const int half_lag = c.lag_window / 2;
    const int half_mu = c.mu_window / 2;
    const int width = c.mu_window;
    std::vector<double> g(static_cast<std::size_t>(half_lag + 1) * width, 0.0);
    g[half_mu] = 1.0;  // tau = 0: delta in mu
    for (int tau = 1; tau <= half_lag; ++tau) {
        const double t2 = static_cast<double>(tau) * tau;
        const double scale = std::sqrt(c.sigma / (4.0 * std::numbers::pi * t2));
        double sum = 0.0;
        for (int mu = -half_mu; mu <= half_mu; ++mu) {
            const double v = scale * std::exp(-c.sigma * mu * mu / (4.0 * t2));
            g[static_cast<std::size_t>(tau) * width + mu + half_mu] = v;
            sum += v;
        }
        for (int k = 0; k < width; ++k) g[static_cast<std::size_t>(tau) * width + k] /= sum;
    }
    return g;
}

// Column c of the output averages raw indices [c*n/out, (c+1)*n/out).
std::pair<std::size_t, std::size_t> bin_range(std::size_t c, std::size_t n, std::size_t out)
{
    return {c * n / out, (c + 1) * n / out};
}

// Shared by cwd and cwd_reference: takes the raw spectrum magnitude
// raw[t][k] (k in natural DFT order) and produces the decimated image with
// the lag-frequency axis rotated so DC lands on the middle row.
TFI decimate(const std::vector<double>& raw, std::size_t n, std::size_t nf, const CWDConfig& c,
             double fs)
{
    TFI out;
    out.height = c.out_height;
    out.width = c.out_width;
    out.fs = fs;
    out.values.assign(static_cast<std::size_t>(c.out_height) * c.out_width, 0.0);
    const std::size_t h = c.out_height;
    const std::size_t w = c.out_width;
    const std::size_t half = nf / 2;
    for (std::size_t col = 0; col < w; ++col) {
        const auto [t0, t1] = bin_range(col, n, w);
        for (std::size_t row = 0; row < h; ++row) {
            const auto [r0, r1] = bin_range(row, nf, h);
            double acc = 0.0;
            for (std::size_t t = t0; t < t1; ++t)
                for (std::size_t r = r0; r < r1; ++r) acc += raw[t * nf + (r + half) % nf];
            const double count = static_cast<double>((t1 - t0) * (r1 - r0));
            out.values[row * w + col] = count > 0 ? acc / count : 0.0;
        }
    }
    return out;
}

std::mutex g_plan_mutex;

}  // namespace

void CWDConfig::validate() const
{
    if (!(sigma > 0.0)) throw ParameterError("CWD sigma must be positive");
    if (lag_window < 3 || lag_window % 2 == 0) throw ParameterError("lag window must be odd and >= 3");
    if (mu_window < 3 || mu_window % 2 == 0) throw ParameterError("mu window must be odd and >= 3");
    if (out_height < 8 || !is_pow2(out_height) || out_width < 8 || !is_pow2(out_width))
        throw ParameterError("TFI dimensions must be powers of two >= 8");
}

int CWDConfig::transform_length() const
{
    return std::max(out_height, static_cast<int>(std::bit_ceil(static_cast<unsigned>(lag_window))));
}

TFI cwd(const waveform::IQSignal& signal, const CWDConfig& config)
{
    config.validate();
    const auto& y = signal.samples;
    const std::size_t n = y.size();
    if (n < static_cast<std::size_t>(config.lag_window))
        throw ShapeError("cwd: signal shorter than the lag window");
    if (n < static_cast<std::size_t>(config.out_width))
        throw ShapeError("cwd: signal shorter than the output width");

    const int half_lag = config.lag_window / 2;
    const int half_mu = config.mu_window / 2;
    const auto nf = static_cast<std::size_t>(config.transform_length());
    const auto g = kernel_table(config);
    const auto ni = static_cast<long>(n);

    auto sample = [&](long i) { return (i >= 0 && i < ni) ? y[i] : cplx{}; };

    // kernel[t][tau] for tau >= 0; negative lags are the conjugates.
    std::vector<cplx> kernel(n * (half_lag + 1));
    std::vector<cplx> product(n + 2 * half_mu);
    for (int tau = 0; tau <= half_lag; ++tau) {
        // product[s + half_mu] = y[s + tau] conj(y[s - tau]) for s in [-half_mu, n + half_mu)
        for (long s = -half_mu; s < ni + half_mu; ++s)
            product[s + half_mu] = sample(s + tau) * std::conj(sample(s - tau));
        const double* gt = &g[static_cast<std::size_t>(tau) * config.mu_window];
        for (long t = 0; t < ni; ++t) {
            cplx acc{};
            const cplx* p = &product[t];
            for (int k = 0; k < config.mu_window; ++k) acc += gt[k] * p[k];
            kernel[t * (half_lag + 1) + tau] = acc;
        }
    }

    fftw_complex* buf = fftw_alloc_complex(nf);
    fftw_plan plan;
    {
        std::lock_guard lock(g_plan_mutex);
        plan = fftw_plan_dft_1d(static_cast<int>(nf), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    std::vector<double> raw(n * nf);
    for (std::size_t t = 0; t < n; ++t) {
        std::fill(reinterpret_cast<double*>(buf), reinterpret_cast<double*>(buf) + 2 * nf, 0.0);
        const cplx* kt = &kernel[t * (half_lag + 1)];
        buf[0][0] = kt[0].real();
        buf[0][1] = kt[0].imag();
        for (int tau = 1; tau <= half_lag; ++tau) {
            buf[tau][0] = kt[tau].real();
            buf[tau][1] = kt[tau].imag();
            buf[nf - tau][0] = kt[tau].real();
            buf[nf - tau][1] = -kt[tau].imag();
        }
        fftw_execute_dft(plan, buf, buf);
        for (std::size_t k = 0; k < nf; ++k) raw[t * nf + k] = std::hypot(buf[k][0], buf[k][1]);
    }
    {
        std::lock_guard lock(g_plan_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return decimate(raw, n, nf, config, signal.fs);
}

TFI cwd_reference(const waveform::IQSignal& signal, const CWDConfig& config)
{
    config.validate();
    const auto& y = signal.samples;
    const std::size_t n = y.size();
    if (n > kReferenceMaxSamples) throw ShapeError("cwd_reference: at most 64 samples supported");
    if (n < static_cast<std::size_t>(config.lag_window))
        throw ShapeError("cwd_reference: signal shorter than the lag window");
    if (n < static_cast<std::size_t>(config.out_width))
        throw ShapeError("cwd_reference: signal shorter than the output width");

    const int half_lag = config.lag_window / 2;
    const int half_mu = config.mu_window / 2;
    const auto nf = static_cast<std::size_t>(config.transform_length());
    const auto ni = static_cast<long>(n);
    auto sample = [&](long i) { return (i >= 0 && i < ni) ? y[i] : cplx{}; };

    auto weight = [&](int mu, int tau) {
        if (tau == 0) return mu == 0 ? 1.0 : 0.0;
        const double t2 = static_cast<double>(tau) * tau;
        auto g = [&](int m) {
            return std::sqrt(config.sigma / (4.0 * std::numbers::pi * t2)) *
                   std::exp(-config.sigma * m * m / (4.0 * t2));
        };
        double sum = 0.0;
        for (int m = -half_mu; m <= half_mu; ++m) sum += g(m);
        return g(mu) / sum;
    };

    std::vector<double> raw(n * nf);
    for (long t = 0; t < ni; ++t) {
        for (std::size_t k = 0; k < nf; ++k) {
            cplx spectrum{};
            for (int tau = -half_lag; tau <= half_lag; ++tau) {
                cplx kv{};
                for (int mu = -half_mu; mu <= half_mu; ++mu)
                    kv += weight(mu, std::abs(tau)) * sample(t + mu + tau) *
                          std::conj(sample(t + mu - tau));
                spectrum += kv * std::polar(1.0, -kTwoPi * static_cast<double>(k) * tau /
                                                     static_cast<double>(nf));
            }
            raw[t * nf + k] = std::abs(spectrum);
        }
    }
    return decimate(raw, n, nf, config, signal.fs);
}

double frequency_row(double f, double fs, int height)
{
    return height / 2.0 + 2.0 * (f - fs / 2.0) * height / fs;
}

TFI normalize_tfi(const TFI& tfi)
{
    const auto count = static_cast<double>(tfi.values.size());
    if (tfi.values.empty()) throw ShapeError("normalize_tfi: empty image");
    double mean = 0.0;
    for (double v : tfi.values) mean += v;
    mean /= count;
    double var = 0.0;
    for (double v : tfi.values) var += (v - mean) * (v - mean);
    var /= count;
    if (!(var > 0.0) || !std::isfinite(var))
        throw NumericError("normalize_tfi: image has zero variance");
    const double inv_std = 1.0 / std::sqrt(var);
    TFI out = tfi;
    for (double& v : out.values) v = (v - mean) * inv_std;
    out.normalized = true;
    return out;
}

void write_pgm(std::ostream& out, const std::vector<double>& values, int height, int width)
{
    if (values.size() != static_cast<std::size_t>(height) * width)
        throw ShapeError("write_pgm: size does not match dimensions");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double span = (values.empty() || *hi == *lo) ? 0.0 : *hi - *lo;
    out << "P5\n" << width << ' ' << height << "\n255\n";
    // Row 0 of the image is the highest frequency so the picture reads
    // like a spectrogram.
    for (int row = height - 1; row >= 0; --row) {
        for (int col = 0; col < width; ++col) {
            const double v = values[static_cast<std::size_t>(row) * width + col];
            const double scaled = span > 0 ? (v - *lo) / span * 255.0 : 0.0;
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
        }
    }
}

void write_pgm(const std::string& path, const TFI& tfi)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    write_pgm(f, tfi.values, tfi.height, tfi.width);
}

}  // namespace nael::tfa
