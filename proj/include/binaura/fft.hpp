// fft.hpp -- iterative radix-2 FFT over power-of-two sizes.
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "binaura/common.hpp"

namespace binaura {

// Precomputed plan for one transform size. Instances are cheap to build and
// not shared between threads; each streaming component owns its own.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0)
            throw Error("Fft size must be a power of two");
        bitrev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            bitrev_[i] = r;
        }
        twiddles_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            twiddles_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& x) const { run(x, false); }

    void inverse(std::vector<std::complex<double>>& x) const {
        run(x, true);
        const double inv = 1.0 / static_cast<double>(n_);
        for (auto& v : x) v *= inv;
    }

private:
    void run(std::vector<std::complex<double>>& x, bool invert) const {
        if (x.size() != n_) throw Error("Fft: input size mismatch");
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t j = bitrev_[i];
            if (i < j) std::swap(x[i], x[j]);
        }
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t step = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    std::complex<double> w = twiddles_[k * step];
                    if (invert) w = std::conj(w);
                    std::complex<double> u = x[start + k];
                    std::complex<double> v = x[start + k + half] * w;
                    x[start + k] = u + v;
                    x[start + k + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> bitrev_;
    std::vector<std::complex<double>> twiddles_;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace binaura
