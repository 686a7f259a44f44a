#pragma once
// Independent brute-force reference computations shared by unit and
// acceptance tests. Nothing here calls into the code under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <set>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

// Every row of the difference triangle has pairwise distinct entries.
inline bool costas_property(const std::vector<int>& seq)
{
    const std::size_t n = seq.size();
    for (std::size_t lag = 1; lag < n; ++lag) {
        std::set<int> seen;
        for (std::size_t i = 0; i + lag < n; ++i)
            if (!seen.insert(seq[i + lag] - seq[i]).second) return false;
    }
    // must also be a permutation of 1..n
    std::vector<int> sorted = seq;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i)
        if (sorted[i] != static_cast<int>(i) + 1) return false;
    return true;
}

// Aperiodic autocorrelation at lags 0..n-1.
inline std::vector<int> autocorrelation(const std::vector<int>& chips)
{
    std::vector<int> r(chips.size(), 0);
    for (std::size_t lag = 0; lag < chips.size(); ++lag)
        for (std::size_t i = 0; i + lag < chips.size(); ++i) r[lag] += chips[i] * chips[i + lag];
    return r;
}

inline std::vector<cplx> naive_dft(const std::vector<cplx>& x)
{
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{};
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n);
        out[k] = acc;
    }
    return out;
}

inline std::size_t argmax_abs(const std::vector<cplx>& x)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i]) > std::abs(x[best])) best = i;
    return best;
}

// Phase of x[n] relative to the carrier exp(j 2 pi fc n / fs), wrapped to [0, 2pi).
inline std::vector<double> demodulate(const std::vector<cplx>& x, double fc, double fs)
{
    std::vector<double> out(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) {
        const cplx ref = std::polar(1.0, 2.0 * std::numbers::pi * fc * static_cast<double>(n) / fs);
        double ph = std::arg(x[n] * std::conj(ref));
        if (ph < 0) ph += 2.0 * std::numbers::pi;
        out[n] = ph;
    }
    return out;
}

// Number of distinct values on the circle, merging values closer than tol.
inline std::size_t distinct_on_circle(const std::vector<double>& phases, double tol = 1e-6)
{
    std::vector<double> reps;
    for (double p : phases) {
        bool found = false;
        for (double r : reps) {
            double d = std::fmod(std::abs(p - r), 2.0 * std::numbers::pi);
            d = std::min(d, 2.0 * std::numbers::pi - d);
            if (d < tol) {
                found = true;
                break;
            }
        }
        if (!found) reps.push_back(p);
    }
    return reps.size();
}

// Five-point central difference (error O(h^4)) of f along coordinate i.
template <typename F>
double stencil(F&& f, std::vector<double>& x, std::size_t i, double h)
{
    const double orig = x[i];
    double at[4];
    const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
    for (int k = 0; k < 4; ++k) {
        x[i] = orig + offsets[k] * h;
        at[k] = f(x);
    }
    x[i] = orig;
    return (-at[0] + 8.0 * at[1] - 8.0 * at[2] + at[3]) / (12.0 * h);
}

// Derivative of a scalar function of a vector, coordinate by coordinate.
// Piecewise-smooth functions (ReLU6 kinks) break the stencil when a kink
// falls inside it, which shows up as disagreement between steps h and h/2;
// the step then shrinks until the two agree.
template <typename F>
std::vector<double> finite_difference(F&& f, std::vector<double> x, double h = 1e-4)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double step = h;
        double coarse = stencil(f, x, i, step);
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double fine = stencil(f, x, i, step / 2);
            g[i] = fine;
            if (std::abs(fine - coarse) <= 1e-7 * std::max(1.0, std::abs(fine))) break;
            step /= 8;
            coarse = stencil(f, x, i, step);
        }
    }
    return g;
}

// max |a - b| / max(|a|, |b|, floor) over all elements.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace oracle
