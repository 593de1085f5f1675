// Shared signal generators and independent oracles for the test suites.
#pragma once

#include <complex>
#include <random>
#include <vector>

#include "binaura/audio.hpp"
#include "binaura/stft.hpp"

namespace testsig {

using binaura::MonoBuffer;
using binaura::BinauralBuffer;

inline MonoBuffer sine(double freq_hz, std::size_t len, double amplitude = 1.0,
                       double phase = 0.0) {
    MonoBuffer out = MonoBuffer::zeros(len);
    for (std::size_t i = 0; i < len; ++i)
        out.samples[i] = static_cast<float>(
            amplitude * std::sin(2.0 * binaura::kPi * freq_hz * i / binaura::kSampleRate +
                                 phase));
    return out;
}

inline MonoBuffer white_noise(std::size_t len, std::uint64_t seed, double amplitude = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    MonoBuffer out = MonoBuffer::zeros(len);
    for (auto& v : out.samples) v = static_cast<float>(dist(rng));
    return out;
}

// Noise with no energy above cutoff_hz: a sum of random-phase sinusoids on a
// dense frequency comb below the cutoff.
inline MonoBuffer band_limited_noise(std::size_t len, std::uint64_t seed,
                                     double cutoff_hz = 7000.0, double rms = 0.25) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * binaura::kPi);
    std::vector<double> acc(len, 0.0);
    const int n_tones = 60;
    for (int t = 0; t < n_tones; ++t) {
        const double f = 80.0 + (cutoff_hz - 120.0) * (t + 0.5) / n_tones;
        const double p = phase(rng);
        for (std::size_t i = 0; i < len; ++i)
            acc[i] += std::sin(2.0 * binaura::kPi * f * i / binaura::kSampleRate + p);
    }
    double power = 0.0;
    for (double v : acc) power += v * v;
    const double scale = rms / std::sqrt(power / len);
    MonoBuffer out = MonoBuffer::zeros(len);
    for (std::size_t i = 0; i < len; ++i)
        out.samples[i] = static_cast<float>(acc[i] * scale);
    return out;
}

// Speech-like test material: band-limited noise with a slow on/off envelope.
inline MonoBuffer burst_noise(std::size_t len, std::uint64_t seed, double rms = 0.3) {
    MonoBuffer out = band_limited_noise(len, seed, 6500.0, rms);
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / binaura::kSampleRate;
        const double env = 0.55 + 0.45 * std::sin(2.0 * binaura::kPi * 1.3 * t + 0.7);
        out.samples[i] = static_cast<float>(out.samples[i] * env);
    }
    return out;
}

// Harmonic "voice": a vibrato-modulated harmonic stack with a syllabic
// amplitude envelope, confined to 300-2600 Hz. Distinct fundamentals give
// the time-frequency sparsity the masking baseline needs, and the band sits
// below the first IPD aliasing slice for grid-scale inter-channel delays.
inline MonoBuffer voice(std::size_t len, std::uint64_t seed, double f0,
                        double rms = 0.3, double band_lo = 300.0,
                        double band_hi = 2600.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * binaura::kPi);
    const double env_phase = phase(rng);
    const double vib_phase = phase(rng);
    std::vector<double> acc(len, 0.0);
    for (int k = 1; k * f0 <= band_hi; ++k) {
        if (k * f0 < band_lo) continue;
        const double p = phase(rng);
        const double amp = 1.0 / std::sqrt(static_cast<double>(k));
        // +/-1.2% vibrato as proper FM: deviation k*f0*0.012 at 4.8 Hz.
        const double beta = 0.012 * k * f0 / 4.8;
        for (std::size_t i = 0; i < len; ++i) {
            const double t = static_cast<double>(i) / binaura::kSampleRate;
            const double mod = beta * std::sin(2.0 * binaura::kPi * 4.8 * t + vib_phase);
            acc[i] += amp * std::sin(2.0 * binaura::kPi * k * f0 * t + mod + p);
        }
    }
    double power = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / binaura::kSampleRate;
        const double env =
            0.35 + 0.65 * std::pow(std::fabs(std::sin(2.0 * binaura::kPi * 1.6 * t + env_phase)), 1.5);
        acc[i] *= env;
        power += acc[i] * acc[i];
    }
    const double scale = rms / std::sqrt(power / len);
    MonoBuffer out = MonoBuffer::zeros(len);
    for (std::size_t i = 0; i < len; ++i)
        out.samples[i] = static_cast<float>(acc[i] * scale);
    return out;
}

// Direct O(n^2) DFT of one windowed frame: the independent oracle for the
// FFT-backed analysis path.
inline std::vector<std::complex<double>> naive_windowed_dft(
    const MonoBuffer& signal, std::size_t start, const binaura::StftConfig& cfg) {
    const std::vector<double> win = binaura::make_window(cfg.window, cfg.window_len);
    std::vector<std::complex<double>> out(cfg.fft_len / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < cfg.window_len; ++i) {
            const double x = win[i] * signal.samples[start + i];
            const double ang = -2.0 * binaura::kPi * static_cast<double>(k) *
                               static_cast<double>(i) / static_cast<double>(cfg.fft_len);
            acc += x * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

inline BinauralBuffer stereo(const MonoBuffer& left, const MonoBuffer& right) {
    return BinauralBuffer(left, right);
}

}  // namespace testsig
