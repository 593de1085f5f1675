// stft.hpp -- short-time Fourier analysis/synthesis.
//
// Frames start at sample 0 with no centering or reflect padding; each frame
// is multiplied by a periodic Hann window and zero-padded to fft_len. The
// inverse uses weighted overlap-add with a per-sample least-squares
// normalizer, which reconstructs the interior exactly even for hop lengths
// larger than half the window (the 760/640 default overlaps by 120 samples).
#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "binaura/audio.hpp"
#include "binaura/fft.hpp"

namespace binaura {

enum class WindowKind { Hann, Rect };

struct StftConfig {
    std::size_t window_len = 760;
    std::size_t hop_len = 640;
    std::size_t fft_len = 1024;
    WindowKind window = WindowKind::Hann;

    std::size_t bins() const { return fft_len / 2 + 1; }

    void validate() const {
        if (hop_len == 0 || hop_len > window_len || window_len > fft_len)
            throw ConfigError("StftConfig: need hop_len <= window_len <= fft_len");
        if ((fft_len & (fft_len - 1)) != 0)
            throw ConfigError("StftConfig: fft_len must be a power of two");
    }
};

inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == WindowKind::Hann) {
        for (std::size_t i = 0; i < n; ++i)
            w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                         static_cast<double>(n)));
    }
    return w;
}

// frames x bins complex matrix, bins = fft_len/2 + 1.
struct ComplexSpectrogram {
    std::size_t frames = 0;
    std::size_t bins = 0;
    StftConfig config;
    std::vector<std::complex<double>> data;  // row-major frames x bins

    std::complex<double>& at(std::size_t frame, std::size_t bin) {
        return data[frame * bins + bin];
    }
    const std::complex<double>& at(std::size_t frame, std::size_t bin) const {
        return data[frame * bins + bin];
    }
};

inline std::size_t stft_frame_count(std::size_t len, const StftConfig& cfg) {
    if (len < cfg.window_len) return 0;
    return (len - cfg.window_len) / cfg.hop_len + 1;
}

inline ComplexSpectrogram stft(const MonoBuffer& signal, const StftConfig& cfg) {
    cfg.validate();
    if (signal.size() < cfg.window_len)
        throw SignalTooShort("stft: signal shorter than one analysis window");

    const std::size_t frames = stft_frame_count(signal.size(), cfg);
    const std::vector<double> win = make_window(cfg.window, cfg.window_len);
    Fft fft(cfg.fft_len);

    ComplexSpectrogram spec;
    spec.frames = frames;
    spec.bins = cfg.bins();
    spec.config = cfg;
    spec.data.resize(frames * spec.bins);

    std::vector<std::complex<double>> buf(cfg.fft_len);
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t start = f * cfg.hop_len;
        for (std::size_t i = 0; i < cfg.window_len; ++i)
            buf[i] = {win[i] * signal.samples[start + i], 0.0};
        for (std::size_t i = cfg.window_len; i < cfg.fft_len; ++i) buf[i] = {0.0, 0.0};
        fft.forward(buf);
        for (std::size_t b = 0; b < spec.bins; ++b) spec.at(f, b) = buf[b];
    }
    return spec;
}

// Expands the half spectrum of one frame to fft_len with conjugate symmetry
// and returns the real time-domain frame.
inline std::vector<double> istft_frame(const ComplexSpectrogram& spec,
                                       std::size_t frame, const Fft& fft) {
    const std::size_t n = spec.config.fft_len;
    std::vector<std::complex<double>> buf(n);
    for (std::size_t b = 0; b < spec.bins; ++b) buf[b] = spec.at(frame, b);
    for (std::size_t b = spec.bins; b < n; ++b) buf[b] = std::conj(buf[n - b]);
    fft.inverse(buf);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

inline MonoBuffer istft(const ComplexSpectrogram& spec) {
    const StftConfig& cfg = spec.config;
    cfg.validate();
    if (spec.frames == 0) return MonoBuffer{};

    const std::size_t out_len = (spec.frames - 1) * cfg.hop_len + cfg.window_len;
    const std::vector<double> win = make_window(cfg.window, cfg.window_len);
    Fft fft(cfg.fft_len);

    std::vector<double> acc(out_len, 0.0);
    std::vector<double> norm(out_len, 0.0);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const std::vector<double> frame = istft_frame(spec, f, fft);
        const std::size_t start = f * cfg.hop_len;
        for (std::size_t i = 0; i < cfg.window_len; ++i) {
            acc[start + i] += win[i] * frame[i];
            norm[start + i] += win[i] * win[i];
        }
    }

    constexpr double kNormFloor = 1e-8;
    MonoBuffer out;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = static_cast<float>(acc[i] / std::max(norm[i], kNormFloor));
    return out;
}

}  // namespace binaura
