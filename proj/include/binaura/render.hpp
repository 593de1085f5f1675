// render.hpp -- spatial cue extraction and binaural rendering of translated
// mono audio: channel duplication, generic-HRTF convolution, and generic
// HRTF with broadband ILD compensation.
#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/audio.hpp"
#include "binaura/brir.hpp"
#include "binaura/dsp.hpp"
#include "binaura/locsep.hpp"

namespace binaura {

inline constexpr double kL1Epsilon = 1e-8;

// Broadband interaural level difference as an L1 ratio, right over left.
inline double ild_linear_ratio(const BinauralBuffer& b) {
    return (b.right.l1_norm() + kL1Epsilon) / (b.left.l1_norm() + kL1Epsilon);
}

struct HrtfEntry {
    double azimuth_deg = 0.0;
    BinauralBuffer ir;
};

// Generic HRTF at zero elevation, tabulated at most every 15 degrees.
struct GenericHrtfTable {
    std::string name;
    std::vector<HrtfEntry> entries;

    void validate() const {
        if (entries.size() < 2) throw MissingHrtf("GenericHrtfTable: too few entries");
        std::vector<double> az;
        for (const auto& e : entries) {
            if (e.ir.empty()) throw MissingHrtf("GenericHrtfTable: empty response");
            az.push_back(wrap_degrees(e.azimuth_deg));
        }
        std::sort(az.begin(), az.end());
        double worst = 0.0;
        for (std::size_t i = 0; i < az.size(); ++i) {
            const double next = i + 1 < az.size() ? az[i + 1] : az[0] + 360.0;
            worst = std::max(worst, next - az[i]);
        }
        if (worst > 15.0 + 1e-9)
            throw MissingHrtf("GenericHrtfTable: azimuth coverage coarser than 15 deg");
    }

    const HrtfEntry& nearest(double azimuth_deg) const {
        if (entries.empty()) throw MissingHrtf("GenericHrtfTable: empty table");
        const HrtfEntry* best = &entries.front();
        double best_d = 1e18;
        for (const auto& e : entries) {
            const double d = wrapped_distance_deg(e.azimuth_deg, azimuth_deg);
            if (d < best_d) {
                best_d = d;
                best = &e;
            }
        }
        return *best;
    }
};

inline GenericHrtfTable hrtf_table_from_brir(const BrirSet& set) {
    GenericHrtfTable table;
    table.name = set.name;
    for (const auto& e : set.entries)
        if (std::fabs(e.elevation_deg) < 1e-9)
            table.entries.push_back({e.azimuth_deg, e.ir});
    table.validate();
    return table;
}

inline GenericHrtfTable make_synthetic_hrtf_table(const std::string& name,
                                                  const SyntheticBrirParams& p = {}) {
    return hrtf_table_from_brir(make_synthetic_brir_set(name, p));
}

// Manifest: {"name": ..., "entries": [{"az": deg, "path": "pair.wav"}, ...]}
// where each path is a stereo WAV holding the (left, right) response pair.
inline void save_hrtf_manifest(const GenericHrtfTable& table, const std::string& dir,
                               const std::string& manifest_path) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["name"] = table.name;
    j["entries"] = nlohmann::json::array();
    int index = 0;
    for (const auto& e : table.entries) {
        const std::string path =
            dir + "/" + table.name + "_" + std::to_string(index++) + ".wav";
        wav_write(path, e.ir, WavEncoding::Float32);
        j["entries"].push_back({{"az", e.azimuth_deg}, {"path", path}});
    }
    std::ofstream f(manifest_path);
    if (!f) throw Error("save_hrtf_manifest: cannot open " + manifest_path);
    f << j.dump(2) << "\n";
}

inline GenericHrtfTable load_hrtf_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw MissingHrtf("load_hrtf_manifest: cannot open " + manifest_path);
    nlohmann::json j;
    f >> j;
    GenericHrtfTable table;
    table.name = j.value("name", "hrtf");
    for (const auto& je : j.at("entries"))
        table.entries.push_back(
            {je.at("az").get<double>(), wav_read_binaural(je.at("path").get<std::string>())});
    table.validate();
    return table;
}

struct SpatialCues {
    double angle_deg = 0.0;
    double ild_linear = 1.0;  // ||right||_1 / ||left||_1 of the separated stem
    double itd_us = 0.0;      // from the table entry at the nearest azimuth
    std::vector<double> band_ild;  // optional per-octave-band ILDs
};

struct CueOptions {
    double power_threshold = 1e-2;
    double gate_window_s = 0.75;
    bool per_band = false;  // also extract octave-band ILDs
};

// Octave band edges in Hz used by the per-band variant.
inline const std::vector<double>& octave_band_edges() {
    static const std::vector<double> edges = {0.0,    125.0,  250.0,  500.0, 1000.0,
                                              2000.0, 4000.0, 8000.0 + 1.0};
    return edges;
}

namespace detail {

// L1 norm of each octave band of a signal, via one full-length FFT split.
inline std::vector<double> band_l1_norms(const MonoBuffer& x) {
    const auto& edges = octave_band_edges();
    const std::size_t n_bands = edges.size() - 1;
    const std::size_t nfft = next_pow2(std::max<std::size_t>(x.size(), 256));
    Fft fft(nfft);
    std::vector<std::complex<double>> spec(nfft);
    for (std::size_t i = 0; i < x.size(); ++i) spec[i] = {static_cast<double>(x.samples[i]), 0.0};
    fft.forward(spec);
    std::vector<double> norms(n_bands, 0.0);
    for (std::size_t band = 0; band < n_bands; ++band) {
        std::vector<std::complex<double>> masked(nfft, {0.0, 0.0});
        for (std::size_t b = 0; b <= nfft / 2; ++b) {
            const double f = static_cast<double>(b) * kSampleRate / nfft;
            if (f >= edges[band] && f < edges[band + 1]) {
                masked[b] = spec[b];
                if (b != 0 && b != nfft / 2) masked[nfft - b] = spec[nfft - b];
            }
        }
        fft.inverse(masked);
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += std::fabs(masked[i].real());
        norms[band] = acc;
    }
    return norms;
}

}  // namespace detail

inline SpatialCues extract_cues(const BinauralBuffer& stem, double angle_deg,
                                const GenericHrtfTable& table,
                                const CueOptions& opts = {}) {
    if (!power_gate(stem, opts.power_threshold, opts.gate_window_s))
        throw SilentStem("extract_cues: stem below the power gate");
    SpatialCues cues;
    cues.angle_deg = wrap_degrees(angle_deg);
    cues.ild_linear = ild_linear_ratio(stem);
    const HrtfEntry& entry = table.nearest(angle_deg);
    cues.itd_us = itd_seconds(entry.ir) * 1e6;
    if (opts.per_band) {
        const auto nl = detail::band_l1_norms(stem.left);
        const auto nr = detail::band_l1_norms(stem.right);
        cues.band_ild.resize(nl.size());
        for (std::size_t i = 0; i < nl.size(); ++i)
            cues.band_ild[i] = (nr[i] + kL1Epsilon) / (nl[i] + kL1Epsilon);
    }
    return cues;
}

enum class RenderMethod { Duplicate, GenericHrtf, GenericHrtfIldComp };

inline RenderMethod render_method_from_string(const std::string& s) {
    if (s == "duplicate") return RenderMethod::Duplicate;
    if (s == "hrtf") return RenderMethod::GenericHrtf;
    if (s == "hrtf-ild") return RenderMethod::GenericHrtfIldComp;
    throw ConfigError("unknown render method: " + s);
}

inline std::string to_string(RenderMethod m) {
    switch (m) {
        case RenderMethod::Duplicate: return "duplicate";
        case RenderMethod::GenericHrtf: return "hrtf";
        default: return "hrtf-ild";
    }
}

// Right-channel gain that makes the rendered L1 ILD equal the cue:
// ild * ||h_l||_1 / ||h_r||_1.
inline double ild_compensation_gain(const SpatialCues& cues, const HrtfEntry& entry) {
    return cues.ild_linear * (entry.ir.left.l1_norm() + kL1Epsilon) /
           (entry.ir.right.l1_norm() + kL1Epsilon);
}

inline BinauralBuffer render(const MonoBuffer& mono, RenderMethod method,
                             double angle_deg, const SpatialCues& cues,
                             const GenericHrtfTable& table) {
    if (method == RenderMethod::Duplicate) return BinauralBuffer(mono, mono);
    table.validate();
    const HrtfEntry& entry = table.nearest(angle_deg);
    BinauralBuffer out(convolve(mono, entry.ir.left), convolve(mono, entry.ir.right));
    if (method == RenderMethod::GenericHrtfIldComp)
        out.right.scale(ild_compensation_gain(cues, entry));
    return out;
}

// Per-band ILD compensation: the right channel of the HRTF render is
// re-scaled per octave band so each band's L1 ratio matches the band cue.
inline BinauralBuffer render_ild_comp_per_band(const MonoBuffer& mono,
                                               double angle_deg,
                                               const SpatialCues& cues,
                                               const GenericHrtfTable& table) {
    if (cues.band_ild.empty())
        throw ConfigError("render_ild_comp_per_band: cues lack band ILDs");
    const HrtfEntry& entry = table.nearest(angle_deg);
    MonoBuffer left = convolve(mono, entry.ir.left);
    MonoBuffer right = convolve(mono, entry.ir.right);

    const auto nl = detail::band_l1_norms(left);
    const auto nr = detail::band_l1_norms(right);
    const auto& edges = octave_band_edges();
    const std::size_t nfft = next_pow2(std::max<std::size_t>(right.size(), 256));
    Fft fft(nfft);
    std::vector<std::complex<double>> spec(nfft);
    for (std::size_t i = 0; i < right.size(); ++i)
        spec[i] = {static_cast<double>(right.samples[i]), 0.0};
    fft.forward(spec);
    for (std::size_t b = 0; b <= nfft / 2; ++b) {
        const double f = static_cast<double>(b) * kSampleRate / nfft;
        std::size_t band = 0;
        while (band + 2 < edges.size() && f >= edges[band + 1]) ++band;
        const double gain =
            cues.band_ild[band] * (nl[band] + kL1Epsilon) / (nr[band] + kL1Epsilon);
        spec[b] *= gain;
        if (b != 0 && b != nfft / 2) spec[nfft - b] = std::conj(spec[b]);
    }
    fft.inverse(spec);
    for (std::size_t i = 0; i < right.size(); ++i)
        right.samples[i] = static_cast<float>(spec[i].real());
    return BinauralBuffer(std::move(left), std::move(right));
}

// Streaming renderer that re-filters each pushed chunk with the cues in
// force at push time and linearly cross-fades filters over 5 ms at chunk
// boundaries. With constant cues this telescopes to one plain convolution,
// so it matches the batch render exactly.
class ReconcilingRenderer {
public:
    ReconcilingRenderer(RenderMethod method, const GenericHrtfTable* table,
                        std::size_t crossfade_samples = 80)
        : method_(method), table_(table), fade_(crossfade_samples) {
        if (method != RenderMethod::Duplicate) {
            if (table == nullptr)
                throw MissingHrtf("ReconcilingRenderer: table required");
            table->validate();
        }
    }

    BinauralBuffer push(const MonoBuffer& chunk, const SpatialCues& cues) {
        Filter filt = make_filter(cues);
        const std::size_t n = chunk.size();
        grow_carry(n + filt.max_len() + fade_);

        if (have_prev_) {
            // The previous filter keeps running over this chunk's first
            // fade_ samples, ramping out while the new filter ramps in.
            const std::size_t f = std::min(fade_, n);
            MonoBuffer head_out = MonoBuffer::zeros(f);
            MonoBuffer head_in = MonoBuffer::zeros(f);
            for (std::size_t i = 0; i < f; ++i) {
                const double a = static_cast<double>(i + 1) / (fade_ + 1);
                head_out.samples[i] = static_cast<float>((1.0 - a) * chunk.samples[i]);
                head_in.samples[i] = static_cast<float>(a * chunk.samples[i]);
            }
            add_filtered(head_out, prev_, 0);
            MonoBuffer rest = chunk;
            for (std::size_t i = 0; i < f; ++i) rest.samples[i] = head_in.samples[i];
            add_filtered(rest, filt, 0);
        } else {
            add_filtered(chunk, filt, 0);
        }

        BinauralBuffer out(MonoBuffer::zeros(n), MonoBuffer::zeros(n));
        for (std::size_t i = 0; i < n; ++i) {
            out.left.samples[i] = static_cast<float>(carry_l_[i]);
            out.right.samples[i] = static_cast<float>(carry_r_[i]);
        }
        carry_l_.erase(carry_l_.begin(), carry_l_.begin() + n);
        carry_r_.erase(carry_r_.begin(), carry_r_.begin() + n);

        prev_ = std::move(filt);
        have_prev_ = true;
        return out;
    }

    // Remaining convolution tail.
    BinauralBuffer flush() {
        std::size_t n = carry_l_.size();
        while (n > 0 && carry_l_[n - 1] == 0.0 && carry_r_[n - 1] == 0.0) --n;
        BinauralBuffer out(MonoBuffer::zeros(n), MonoBuffer::zeros(n));
        for (std::size_t i = 0; i < n; ++i) {
            out.left.samples[i] = static_cast<float>(carry_l_[i]);
            out.right.samples[i] = static_cast<float>(carry_r_[i]);
        }
        carry_l_.clear();
        carry_r_.clear();
        have_prev_ = false;
        return out;
    }

private:
    struct Filter {
        std::vector<float> h_l{1.0f};
        std::vector<float> h_r{1.0f};
        double gain_r = 1.0;
        std::size_t max_len() const { return std::max(h_l.size(), h_r.size()); }
    };

    Filter make_filter(const SpatialCues& cues) const {
        Filter f;
        if (method_ == RenderMethod::Duplicate) return f;
        const HrtfEntry& entry = table_->nearest(cues.angle_deg);
        f.h_l = entry.ir.left.samples;
        f.h_r = entry.ir.right.samples;
        if (method_ == RenderMethod::GenericHrtfIldComp)
            f.gain_r = ild_compensation_gain(cues, entry);
        return f;
    }

    void grow_carry(std::size_t n) {
        if (carry_l_.size() < n) {
            carry_l_.resize(n, 0.0);
            carry_r_.resize(n, 0.0);
        }
    }

    void add_filtered(const MonoBuffer& x, const Filter& f, std::size_t offset) {
        grow_carry(offset + x.size() + f.max_len());
        for (std::size_t j = 0; j < f.h_l.size(); ++j) {
            const double h = f.h_l[j];
            if (h == 0.0) continue;
            for (std::size_t i = 0; i < x.size(); ++i)
                carry_l_[offset + i + j] += h * static_cast<double>(x.samples[i]);
        }
        for (std::size_t j = 0; j < f.h_r.size(); ++j) {
            const double h = f.gain_r * f.h_r[j];
            if (h == 0.0) continue;
            for (std::size_t i = 0; i < x.size(); ++i)
                carry_r_[offset + i + j] += h * static_cast<double>(x.samples[i]);
        }
    }

    RenderMethod method_;
    const GenericHrtfTable* table_;
    std::size_t fade_;
    std::vector<double> carry_l_, carry_r_;
    Filter prev_;
    bool have_prev_ = false;
};

// Renders translated chunk i with the spatial cues of chunk i+D (the latest
// observed cue once the stream runs out). Returns the concatenated binaural
// output including the final convolution tail.
inline BinauralBuffer reconcile_delay(const std::vector<SpatialCues>& cue_stream,
                                      const std::vector<MonoBuffer>& translated,
                                      std::size_t delay_chunks, RenderMethod method,
                                      const GenericHrtfTable* table) {
    if (cue_stream.empty()) throw ConfigError("reconcile_delay: empty cue stream");
    ReconcilingRenderer renderer(method, table);
    BinauralBuffer out;
    for (std::size_t i = 0; i < translated.size(); ++i) {
        const std::size_t cue_index =
            std::min(i + delay_chunks, cue_stream.size() - 1);
        BinauralBuffer piece = renderer.push(translated[i], cue_stream[cue_index]);
        out.left.samples.insert(out.left.samples.end(), piece.left.samples.begin(),
                                piece.left.samples.end());
        out.right.samples.insert(out.right.samples.end(), piece.right.samples.begin(),
                                 piece.right.samples.end());
    }
    BinauralBuffer tail = renderer.flush();
    out.left.samples.insert(out.left.samples.end(), tail.left.samples.begin(),
                            tail.left.samples.end());
    out.right.samples.insert(out.right.samples.end(), tail.right.samples.begin(),
                             tail.right.samples.end());
    return out;
}

}  // namespace binaura
