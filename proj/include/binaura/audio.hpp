// audio.hpp -- mono and binaural sample buffers, the currency of every module.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "binaura/common.hpp"

namespace binaura {

// Single-channel 16 kHz signal. Samples are float32, nominal range [-1, 1];
// all reductions over them accumulate in double.
struct MonoBuffer {
    std::vector<float> samples;

    MonoBuffer() = default;
    explicit MonoBuffer(std::vector<float> s) : samples(std::move(s)) {}

    static MonoBuffer zeros(std::size_t n) {
        return MonoBuffer(std::vector<float>(n, 0.0f));
    }

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    float operator[](std::size_t i) const { return samples[i]; }
    float& operator[](std::size_t i) { return samples[i]; }

    double duration_s() const {
        return static_cast<double>(samples.size()) / kSampleRate;
    }

    bool all_finite() const {
        for (float v : samples)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double rms() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (float v : samples) acc += static_cast<double>(v) * v;
        return std::sqrt(acc / samples.size());
    }

    double mean_square() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (float v : samples) acc += static_cast<double>(v) * v;
        return acc / samples.size();
    }

    double l1_norm() const {
        double acc = 0.0;
        for (float v : samples) acc += std::fabs(static_cast<double>(v));
        return acc;
    }

    MonoBuffer slice(std::size_t begin, std::size_t count) const {
        MonoBuffer out;
        out.samples.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t j = begin + i;
            out.samples.push_back(j < samples.size() ? samples[j] : 0.0f);
        }
        return out;
    }

    void scale(double g) {
        for (float& v : samples) v = static_cast<float>(v * g);
    }

    void add(const MonoBuffer& other, double gain = 1.0) {
        if (other.size() > size()) samples.resize(other.size(), 0.0f);
        for (std::size_t i = 0; i < other.size(); ++i)
            samples[i] = static_cast<float>(samples[i] + gain * other.samples[i]);
    }

    void pad_to(std::size_t n) {
        if (samples.size() < n) samples.resize(n, 0.0f);
    }
};

// Two-channel 16 kHz signal; both channels always hold the same length.
struct BinauralBuffer {
    MonoBuffer left;
    MonoBuffer right;

    BinauralBuffer() = default;
    BinauralBuffer(MonoBuffer l, MonoBuffer r)
        : left(std::move(l)), right(std::move(r)) {
        equalize_length();
    }

    static BinauralBuffer zeros(std::size_t n) {
        return BinauralBuffer(MonoBuffer::zeros(n), MonoBuffer::zeros(n));
    }

    std::size_t size() const { return left.size(); }
    bool empty() const { return left.empty(); }

    void equalize_length() {
        std::size_t n = std::max(left.size(), right.size());
        left.pad_to(n);
        right.pad_to(n);
    }

    double mean_square() const {
        if (empty()) return 0.0;
        return 0.5 * (left.mean_square() + right.mean_square());
    }

    void scale(double g) {
        left.scale(g);
        right.scale(g);
    }

    void add(const BinauralBuffer& other, double gain = 1.0) {
        left.add(other.left, gain);
        right.add(other.right, gain);
        equalize_length();
    }

    void pad_to(std::size_t n) {
        left.pad_to(n);
        right.pad_to(n);
    }

    BinauralBuffer slice(std::size_t begin, std::size_t count) const {
        return BinauralBuffer(left.slice(begin, count), right.slice(begin, count));
    }
};

// RMS of (a - b). Lengths may differ; the shorter one is zero-extended.
inline double rms_error(const MonoBuffer& a, const MonoBuffer& b) {
    std::size_t n = std::max(a.size(), b.size());
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double av = i < a.size() ? a.samples[i] : 0.0;
        double bv = i < b.size() ? b.samples[i] : 0.0;
        acc += (av - bv) * (av - bv);
    }
    return std::sqrt(acc / n);
}

// RMS of (a - b) excluding `margin` samples at both ends.
inline double interior_rms_error(const MonoBuffer& a, const MonoBuffer& b,
                                 std::size_t margin) {
    std::size_t n = std::min(a.size(), b.size());
    if (n <= 2 * margin) return 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = margin; i + margin < n; ++i) {
        double d = static_cast<double>(a.samples[i]) - b.samples[i];
        acc += d * d;
        ++count;
    }
    return std::sqrt(acc / count);
}

}  // namespace binaura
