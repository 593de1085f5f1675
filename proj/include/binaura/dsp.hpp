// dsp.hpp -- convolution, fractional delay and bounded cross-correlation.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "binaura/audio.hpp"
#include "binaura/fft.hpp"

namespace binaura {

namespace detail {

inline double sinc(double x) {
    if (std::fabs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

// Zeroth-order modified Bessel function, series expansion.
inline double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = 0.25 * x * x;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

}  // namespace detail

// Windowed-sinc interpolation kernel approximating a delay of `delay`
// samples. Taps cover k in [first_tap, first_tap + taps.size()); the kernel
// is band-limited to cutoff * Nyquist (0.95 -> 7.6 kHz at 16 kHz).
struct DelayKernel {
    std::vector<double> taps;
    long first_tap = 0;

    static DelayKernel design(double delay_samples, int half_width = 48,
                              double cutoff = 0.95, double kaiser_beta = 9.0) {
        DelayKernel k;
        const long center = std::lround(delay_samples);
        k.first_tap = center - half_width;
        k.taps.resize(2 * half_width + 1);
        const double i0_beta = detail::bessel_i0(kaiser_beta);
        for (int i = 0; i <= 2 * half_width; ++i) {
            const double t = static_cast<double>(k.first_tap + i) - delay_samples;
            const double u = t / (half_width + 1.0);
            double w = 0.0;
            if (std::fabs(u) <= 1.0)
                w = detail::bessel_i0(kaiser_beta * std::sqrt(1.0 - u * u)) / i0_beta;
            k.taps[i] = cutoff * detail::sinc(cutoff * t) * w;
        }
        return k;
    }

    // y(n) = sum_i taps[i] * x(n - first_tap - i), x zero outside its range.
    MonoBuffer apply(const MonoBuffer& x) const {
        MonoBuffer y = MonoBuffer::zeros(x.size());
        const long n = static_cast<long>(x.size());
        for (long out = 0; out < n; ++out) {
            double acc = 0.0;
            for (std::size_t i = 0; i < taps.size(); ++i) {
                const long src = out - first_tap - static_cast<long>(i);
                if (src >= 0 && src < n)
                    acc += taps[i] * static_cast<double>(x.samples[src]);
            }
            y.samples[out] = static_cast<float>(acc);
        }
        return y;
    }
};

// Full linear convolution; output length len(signal) + len(ir) - 1.
// Switches to an FFT product when the direct cost gets large.
inline MonoBuffer convolve(const MonoBuffer& signal, const MonoBuffer& ir) {
    if (signal.empty() || ir.empty())
        throw Error("convolve: empty input");
    const std::size_t n = signal.size(), m = ir.size();
    const std::size_t out_len = n + m - 1;

    if (n * m <= std::size_t{1} << 22) {
        MonoBuffer out = MonoBuffer::zeros(out_len);
        std::vector<double> acc(out_len, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const double h = ir.samples[j];
            if (h == 0.0) continue;
            for (std::size_t i = 0; i < n; ++i)
                acc[i + j] += h * static_cast<double>(signal.samples[i]);
        }
        for (std::size_t i = 0; i < out_len; ++i)
            out.samples[i] = static_cast<float>(acc[i]);
        return out;
    }

    const std::size_t nfft = next_pow2(out_len);
    Fft fft(nfft);
    std::vector<std::complex<double>> a(nfft), b(nfft);
    for (std::size_t i = 0; i < n; ++i) a[i] = {static_cast<double>(signal.samples[i]), 0.0};
    for (std::size_t i = 0; i < m; ++i) b[i] = {static_cast<double>(ir.samples[i]), 0.0};
    fft.forward(a);
    fft.forward(b);
    for (std::size_t i = 0; i < nfft; ++i) a[i] *= b[i];
    fft.inverse(a);
    MonoBuffer out = MonoBuffer::zeros(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = static_cast<float>(a[i].real());
    return out;
}

inline BinauralBuffer convolve(const MonoBuffer& signal, const BinauralBuffer& ir) {
    return BinauralBuffer(convolve(signal, ir.left), convolve(signal, ir.right));
}

inline constexpr double kMaxDelaySeconds = 2e-3;

// Delays (delay_s > 0) or advances a signal by a possibly fractional number
// of samples. Integer delays are exact shifts; fractional remainders go
// through the windowed-sinc kernel, band-limited to 7.6 kHz. Output has the
// same length with zero-padded edges.
inline MonoBuffer fractional_delay(const MonoBuffer& signal, double delay_s) {
    if (std::fabs(delay_s) > kMaxDelaySeconds + 1e-12)
        throw DelayOutOfRange("fractional_delay: |delay| exceeds 2 ms");

    const double delay_samples = delay_s * kSampleRate;
    const long n_int = std::lround(delay_samples);
    const double frac = delay_samples - static_cast<double>(n_int);
    const long n = static_cast<long>(signal.size());

    MonoBuffer shifted;
    if (std::fabs(frac) < 1e-9) {
        shifted = MonoBuffer::zeros(signal.size());
        for (long i = 0; i < n; ++i) {
            const long src = i - n_int;
            if (src >= 0 && src < n) shifted.samples[i] = signal.samples[src];
        }
        return shifted;
    }

    const DelayKernel kernel = DelayKernel::design(frac + static_cast<double>(n_int));
    return kernel.apply(signal);
}

namespace detail {

struct XcorrPeak {
    long lag = 0;       // samples, positive when right lags left
    double corr = 0.0;  // normalized correlation at the peak
};

// Scans integer lags in order 0, +1, -1, +2, -2, ... so exact ties resolve
// toward the smaller |lag|.
inline XcorrPeak xcorr_scan(const MonoBuffer& left, const MonoBuffer& right,
                            long max_lag) {
    const long n = static_cast<long>(std::min(left.size(), right.size()));
    XcorrPeak best;
    best.corr = -2.0;
    for (long m = 0; m <= max_lag; ++m) {
        for (int sign = 0; sign < (m == 0 ? 1 : 2); ++sign) {
            const long lag = sign == 0 ? m : -m;
            const long lo = std::max(long{0}, -lag);
            const long hi = n - std::max(long{0}, lag);
            double dot = 0.0, nl = 0.0, nr = 0.0;
            for (long i = lo; i < hi; ++i) {
                const double a = left.samples[i];
                const double b = right.samples[i + lag];
                dot += a * b;
                nl += a * a;
                nr += b * b;
            }
            const double denom = std::sqrt(nl * nr);
            const double corr = denom > 0.0 ? dot / denom : 0.0;
            if (corr > best.corr) {
                best.corr = corr;
                best.lag = lag;
            }
        }
    }
    return best;
}

}  // namespace detail

// Lag (seconds, right relative to left; positive when right lags) that
// maximizes the normalized cross-correlation within +/- max_lag_s.
inline double xcorr_lag(const MonoBuffer& left, const MonoBuffer& right,
                        double max_lag_s = 1e-3) {
    if (left.size() != right.size())
        throw Error("xcorr_lag: length mismatch");
    double el = 0.0, er = 0.0;
    for (float v : left.samples) el += static_cast<double>(v) * v;
    for (float v : right.samples) er += static_cast<double>(v) * v;
    if (el == 0.0 || er == 0.0)
        throw UndefinedCorrelation("xcorr_lag: all-zero input");
    const long max_lag = std::lround(max_lag_s * kSampleRate);
    const auto peak = detail::xcorr_scan(left, right, max_lag);
    return static_cast<double>(peak.lag) / kSampleRate;
}

// Peak normalized correlation value within +/- max_lag_s; 0 for silent input.
inline double xcorr_peak_value(const MonoBuffer& left, const MonoBuffer& right,
                               double max_lag_s = 1e-3) {
    double el = 0.0, er = 0.0;
    for (float v : left.samples) el += static_cast<double>(v) * v;
    for (float v : right.samples) er += static_cast<double>(v) * v;
    if (el == 0.0 || er == 0.0) return 0.0;
    const long max_lag = std::lround(max_lag_s * kSampleRate);
    return detail::xcorr_scan(left, right, max_lag).corr;
}

// Interaural time difference of a binaural buffer, in seconds.
inline double itd_seconds(const BinauralBuffer& b, double max_lag_s = 1e-3) {
    return xcorr_lag(b.left, b.right, max_lag_s);
}

// Causal streaming FIR with a fixed tap vector. push() consumes a chunk and
// returns the same number of output samples; the caller accounts for the
// taps' group delay.
class StreamingFir {
public:
    explicit StreamingFir(std::vector<double> taps)
        : taps_(std::move(taps)), history_(taps_.size() - 1, 0.0) {}

    std::vector<float> push(const float* chunk, std::size_t len) {
        std::vector<float> out(len);
        const std::size_t h = history_.size();
        for (std::size_t i = 0; i < len; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < taps_.size(); ++k) {
                const long src = static_cast<long>(i) - static_cast<long>(k);
                const double x = src >= 0
                    ? static_cast<double>(chunk[src])
                    : history_[h + src];
                acc += taps_[k] * x;
            }
            out[i] = static_cast<float>(acc);
        }
        if (len >= h) {
            for (std::size_t k = 0; k < h; ++k) history_[k] = chunk[len - h + k];
        } else {
            history_.erase(history_.begin(), history_.begin() + len);
            for (std::size_t k = 0; k < len; ++k)
                history_.push_back(static_cast<double>(chunk[k]));
        }
        return out;
    }

private:
    std::vector<double> taps_;
    std::vector<double> history_;
};

}  // namespace binaura
