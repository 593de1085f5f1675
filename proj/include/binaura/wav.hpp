// wav.hpp -- RIFF/WAV I/O, PCM16 and float32 at 16 kHz only.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "binaura/audio.hpp"

namespace binaura {

enum class WavEncoding { Pcm16, Float32 };

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 24) & 0xff);
}

inline void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void write_wav_file(const std::string& path, const float* const* channels,
                           std::size_t n_channels, std::size_t frames,
                           WavEncoding enc) {
    const std::uint16_t fmt_tag = enc == WavEncoding::Pcm16 ? 1 : 3;
    const std::uint16_t bytes_per_sample = enc == WavEncoding::Pcm16 ? 2 : 4;
    const std::uint32_t data_bytes =
        static_cast<std::uint32_t>(frames * n_channels * bytes_per_sample);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    put_u32(out, 36 + data_bytes);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    put_u32(out, 16);
    put_u16(out, fmt_tag);
    put_u16(out, static_cast<std::uint16_t>(n_channels));
    put_u32(out, kSampleRate);
    put_u32(out, kSampleRate * n_channels * bytes_per_sample);
    put_u16(out, static_cast<std::uint16_t>(n_channels * bytes_per_sample));
    put_u16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    put_u32(out, data_bytes);

    for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < n_channels; ++c) {
            const float v = channels[c][i];
            if (enc == WavEncoding::Pcm16) {
                double scaled = static_cast<double>(v) * 32767.0;
                scaled = std::min(32767.0, std::max(-32768.0, scaled));
                const auto q = static_cast<std::int16_t>(std::lround(scaled));
                put_u16(out, static_cast<std::uint16_t>(q));
            } else {
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                put_u32(out, bits);
            }
        }
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("wav_write: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
}

}  // namespace detail

inline void wav_write(const std::string& path, const MonoBuffer& buf,
                      WavEncoding enc = WavEncoding::Float32) {
    const float* chans[1] = {buf.samples.data()};
    detail::write_wav_file(path, chans, 1, buf.size(), enc);
}

inline void wav_write(const std::string& path, const BinauralBuffer& buf,
                      WavEncoding enc = WavEncoding::Float32) {
    const float* chans[2] = {buf.left.samples.data(), buf.right.samples.data()};
    detail::write_wav_file(path, chans, 2, buf.size(), enc);
}

using WavContent = std::variant<MonoBuffer, BinauralBuffer>;

inline WavContent wav_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingAsset("wav_read: cannot open " + path);
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
        std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
        throw Error("wav_read: not a RIFF/WAVE file: " + path);

    std::uint16_t fmt_tag = 0, n_channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const std::uint8_t* data = nullptr;
    std::uint32_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= raw.size()) {
        const char* id = reinterpret_cast<const char*>(raw.data() + pos);
        const std::uint32_t len = detail::get_u32(raw.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > raw.size()) break;
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            fmt_tag = detail::get_u16(raw.data() + body);
            n_channels = detail::get_u16(raw.data() + body + 2);
            rate = detail::get_u32(raw.data() + body + 4);
            bits = detail::get_u16(raw.data() + body + 14);
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = raw.data() + body;
            data_len = len;
        }
        pos = body + len + (len & 1);
    }

    if (fmt_tag == 0 || data == nullptr)
        throw Error("wav_read: missing fmt or data chunk: " + path);
    if (rate != kSampleRate)
        throw UnsupportedRate("wav_read: expected 16 kHz, got " +
                              std::to_string(rate) + " Hz: " + path);
    if (n_channels < 1 || n_channels > 2)
        throw UnsupportedLayout("wav_read: expected 1 or 2 channels, got " +
                                std::to_string(n_channels) + ": " + path);

    const bool pcm16 = fmt_tag == 1 && bits == 16;
    const bool f32 = fmt_tag == 3 && bits == 32;
    if (!pcm16 && !f32)
        throw Error("wav_read: only PCM16 and float32 are supported: " + path);

    const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
    const std::size_t frames = data_len / (bytes_per_sample * n_channels);

    std::vector<MonoBuffer> chans(n_channels);
    for (auto& c : chans) c.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < n_channels; ++c) {
            const std::uint8_t* p = data + (i * n_channels + c) * bytes_per_sample;
            float v;
            if (pcm16) {
                const auto q = static_cast<std::int16_t>(detail::get_u16(p));
                v = static_cast<float>(q / 32767.0);
            } else {
                std::uint32_t b = detail::get_u32(p);
                std::memcpy(&v, &b, 4);
            }
            chans[c].samples[i] = v;
        }
    }

    if (n_channels == 1) return WavContent(std::move(chans[0]));
    return WavContent(BinauralBuffer(std::move(chans[0]), std::move(chans[1])));
}

inline MonoBuffer wav_read_mono(const std::string& path) {
    WavContent c = wav_read(path);
    if (auto* m = std::get_if<MonoBuffer>(&c)) return std::move(*m);
    throw UnsupportedLayout("wav_read_mono: expected a mono file: " + path);
}

inline BinauralBuffer wav_read_binaural(const std::string& path) {
    WavContent c = wav_read(path);
    if (auto* b = std::get_if<BinauralBuffer>(&c)) return std::move(*b);
    throw UnsupportedLayout("wav_read_binaural: expected a stereo file: " + path);
}

}  // namespace binaura
