// locsep.hpp -- search-based joint localization and separation on an angular
// grid: per-bin TDoA alignment, pluggable separators, power gating and
// similarity clustering of duplicate candidates.
#pragma once

#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "binaura/audio.hpp"
#include "binaura/dsp.hpp"
#include "binaura/geometry.hpp"
#include "binaura/stft.hpp"

namespace binaura {

inline constexpr std::size_t kSeparatorHop = 640;      // 40 ms
inline constexpr std::size_t kSeparatorWindow = 760;   // 47.5 ms
inline constexpr std::size_t kSeparatorHistory = kSeparatorWindow - kSeparatorHop;

struct LocsepConfig {
    AngularGrid grid;
    ArrayGeometry geometry;
    double power_threshold = 1e-2;
    double gate_window_s = 0.75;
    double sim_segment_s = 0.75;
    double sim_corr_threshold = 0.7;
    double sim_fraction = 0.5;
    double sim_max_lag_s = 1e-3;
    double phase_mask_threshold_rad = 0.35;
    double phase_mask_floor = 0.05;
    std::size_t phase_mask_smooth_bins = 3;
    double phase_mask_time_ema = 0.3;
    bool parallel = false;
    // Receives one line per failed search bin.
    std::function<void(const std::string&)> diagnostics =
        [](const std::string& msg) { std::fprintf(stderr, "binaura: %s\n", msg.c_str()); };

    void validate() const {
        grid.validate();
        geometry.validate();
        if (power_threshold <= 0.0 || gate_window_s <= 0.0)
            throw ConfigError("LocsepConfig: gate parameters must be positive");
        if (sim_fraction < 0.0 || sim_fraction > 1.0 || sim_corr_threshold < -1.0 ||
            sim_corr_threshold > 1.0)
            throw ConfigError("LocsepConfig: similarity thresholds out of range");
    }
};

// Shifts the right channel by -tdoa(angle) so a far-field source at that
// angle becomes time-aligned across channels; the left channel is untouched.
inline BinauralBuffer align_to_angle(const BinauralBuffer& x, double angle_deg,
                                     const ArrayGeometry& geom = {}) {
    const double tdoa = tdoa_seconds(angle_deg, geom);
    return BinauralBuffer(x.left, fractional_delay(x.right, -tdoa));
}

struct FeatureMaps {
    std::size_t frames = 0;
    std::size_t bins = 0;
    std::vector<double> ipd;  // radians, wrapped to (-pi, pi]
    std::vector<double> ild;  // dB

    double& ipd_at(std::size_t f, std::size_t b) { return ipd[f * bins + b]; }
    double& ild_at(std::size_t f, std::size_t b) { return ild[f * bins + b]; }
    double ipd_at(std::size_t f, std::size_t b) const { return ipd[f * bins + b]; }
    double ild_at(std::size_t f, std::size_t b) const { return ild[f * bins + b]; }
};

// IPD = arg(R * conj(L)); ILD = 20 log10((|R|+eps)/(|L|+eps)).
inline FeatureMaps ipd_ild_features(const ComplexSpectrogram& spec_l,
                                    const ComplexSpectrogram& spec_r) {
    if (spec_l.frames != spec_r.frames || spec_l.bins != spec_r.bins)
        throw Error("ipd_ild_features: shape mismatch");
    constexpr double eps = 1e-8;
    FeatureMaps maps;
    maps.frames = spec_l.frames;
    maps.bins = spec_l.bins;
    maps.ipd.resize(maps.frames * maps.bins);
    maps.ild.resize(maps.frames * maps.bins);
    for (std::size_t i = 0; i < maps.ipd.size(); ++i) {
        const auto l = spec_l.data[i];
        const auto r = spec_r.data[i];
        maps.ipd[i] = std::arg(r * std::conj(l));
        maps.ild[i] = 20.0 * std::log10((std::abs(r) + eps) / (std::abs(l) + eps));
    }
    return maps;
}

// True iff any gate_window_s stretch has mean squared amplitude (averaged
// over both channels) at or above the threshold. Signals shorter than the
// window are judged on a single whole-signal window.
inline bool power_gate(const BinauralBuffer& stem, double threshold = 1e-2,
                       double window_s = 0.75) {
    if (stem.empty()) return false;
    const std::size_t n = stem.size();
    const std::size_t win = std::min<std::size_t>(
        n, static_cast<std::size_t>(window_s * kSampleRate));
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = stem.left.samples[i];
        const double r = stem.right.samples[i];
        prefix[i + 1] = prefix[i] + 0.5 * (l * l + r * r);
    }
    for (std::size_t start = 0; start + win <= n; ++start) {
        const double mean = (prefix[start + win] - prefix[start]) / win;
        if (mean >= threshold) return true;
    }
    return false;
}

// Streaming separator contract: consume one aligned 640-sample binaural
// chunk for a target angle, emit whatever output samples are final. Output
// chunk i may depend only on input chunks <= i. flush() drains the rest;
// total output length always equals total input length.
class Separator {
public:
    virtual ~Separator() = default;
    virtual BinauralBuffer process(const BinauralBuffer& aligned_chunk,
                                   double target_angle_deg) = 0;
    virtual BinauralBuffer flush() { return {}; }
    // True when the emitted samples are still in the aligned timeline (right
    // channel shifted by -tdoa(target)); search() undoes that shift on
    // surviving candidates. The oracle emits ground-truth chunks and is
    // already in the mixture timeline.
    virtual bool output_aligned() const { return false; }
};

using SeparatorFactory = std::function<std::unique_ptr<Separator>(void)>;

// Ground-truth stand-in for a trained separation network: emits the true
// stem chunks whenever the target angle falls within half a bin of a source,
// the sum if several sources share the bin, and zeros otherwise.
class OracleSeparator : public Separator {
public:
    // angle_of(stem, chunk) lets moving scenes report per-chunk truth angles.
    OracleSeparator(const std::vector<BinauralBuffer>* stems,
                    std::function<double(std::size_t, std::size_t)> angle_of,
                    double half_bin_deg)
        : stems_(stems), angle_of_(std::move(angle_of)), half_bin_(half_bin_deg) {}

    BinauralBuffer process(const BinauralBuffer& chunk,
                           double target_angle_deg) override {
        BinauralBuffer out = BinauralBuffer::zeros(chunk.size());
        for (std::size_t s = 0; s < stems_->size(); ++s) {
            const double truth = angle_of_(s, chunk_index_);
            if (wrapped_distance_deg(truth, target_angle_deg) <= half_bin_ + 1e-9) {
                const BinauralBuffer piece =
                    (*stems_)[s].slice(chunk_index_ * kSeparatorHop, chunk.size());
                out.add(piece);
            }
        }
        ++chunk_index_;
        return out;
    }

private:
    const std::vector<BinauralBuffer>* stems_;
    std::function<double(std::size_t, std::size_t)> angle_of_;
    double half_bin_;
    std::size_t chunk_index_ = 0;
};

inline SeparatorFactory oracle_separator_factory(
    const std::vector<BinauralBuffer>* stems, std::vector<double> truth_angles,
    double half_bin_deg) {
    return [stems, angles = std::move(truth_angles), half_bin_deg]() {
        return std::make_unique<OracleSeparator>(
            stems, [angles](std::size_t s, std::size_t) { return angles[s]; },
            half_bin_deg);
    };
}

// Synthesis window for masked-frame overlap-add: flat with short cosine
// ramps at the frame edges. Overlap-add with this window and a
// sum(syn * analysis) normalizer reconstructs unmodified frames exactly,
// while the edge ramps keep masking leakage away from the positions where
// the analysis Hann vanishes (the hop exceeds half the window, so a plain
// least-squares inverse would amplify it).
inline std::vector<double> make_synthesis_taper(std::size_t n, std::size_t ramp = 32) {
    std::vector<double> t(n, 1.0);
    for (std::size_t i = 0; i < ramp && i < n; ++i) {
        const double c = 0.5 * (1.0 - std::cos(kPi * (i + 1) / (ramp + 1)));
        t[i] = c;
        t[n - 1 - i] = c;
    }
    return t;
}

// DSP baseline separator: per hop, a 760-sample window (120 samples of
// retained history + the new chunk) is transformed, the IPD computed, and a
// binary-with-floor mask keeps bins whose phase difference is small. Both
// masked channels are resynthesized by weighted overlap-add; 120 samples per
// chunk stay in the accumulator until the next hop, so output trails input
// by one partial chunk and flush() emits the remainder.
class PhaseMaskSeparator : public Separator {
public:
    explicit PhaseMaskSeparator(double threshold_rad = 0.35, double floor = 0.05,
                                std::size_t fft_len = 1024,
                                std::size_t smooth_halfwidth = 3,
                                double time_ema = 0.3)
        : threshold_(threshold_rad),
          floor_(floor),
          fft_len_(fft_len),
          smooth_halfwidth_(smooth_halfwidth),
          time_ema_(time_ema),
          fft_(fft_len),
          window_(make_window(WindowKind::Hann, kSeparatorWindow)),
          synthesis_(make_synthesis_taper(kSeparatorWindow)),
          hist_l_(kSeparatorHistory, 0.0f),
          hist_r_(kSeparatorHistory, 0.0f),
          prev_mask_(fft_len / 2 + 1, 1.0),
          tail_l_(kSeparatorHistory, 0.0),
          tail_r_(kSeparatorHistory, 0.0),
          tail_norm_(kSeparatorHistory, 0.0) {}

    BinauralBuffer process(const BinauralBuffer& chunk, double) override {
        if (chunk.size() != kSeparatorHop)
            throw Error("PhaseMaskSeparator: chunk must be 640 samples");

        std::vector<std::complex<double>> spec_l = analyze(hist_l_, chunk.left);
        std::vector<std::complex<double>> spec_r = analyze(hist_r_, chunk.right);

        // Binary-with-floor IPD mask, then a short triangular smoothing over
        // frequency and a causal first-order smoothing over frames. The
        // smoothing localizes the mask's time kernel; a hard mask rings far
        // outside the analysis envelope at this hop size.
        const std::size_t bins = fft_len_ / 2 + 1;
        std::vector<double> mask(bins);
        for (std::size_t b = 0; b < bins; ++b) {
            const double ipd = std::arg(spec_r[b] * std::conj(spec_l[b]));
            mask[b] = std::fabs(ipd) < threshold_ ? 1.0 : floor_;
        }
        if (smooth_halfwidth_ > 0) {
            std::vector<double> smooth(bins);
            const auto hw = static_cast<long>(smooth_halfwidth_);
            for (long b = 0; b < static_cast<long>(bins); ++b) {
                double acc = 0.0, wsum = 0.0;
                for (long k = -hw; k <= hw; ++k) {
                    const long j = b + k;
                    if (j < 0 || j >= static_cast<long>(bins)) continue;
                    const double w = 1.0 - std::fabs(static_cast<double>(k)) / (hw + 1);
                    acc += w * mask[j];
                    wsum += w;
                }
                smooth[b] = acc / wsum;
            }
            mask.swap(smooth);
        }
        if (time_ema_ > 0.0) {
            for (std::size_t b = 0; b < bins; ++b) {
                mask[b] = time_ema_ * prev_mask_[b] + (1.0 - time_ema_) * mask[b];
                prev_mask_[b] = mask[b];
            }
        }

        for (std::size_t b = 0; b < bins; ++b) {
            spec_l[b] *= mask[b];
            spec_r[b] *= mask[b];
            if (b != 0 && b != fft_len_ / 2) {
                spec_l[fft_len_ - b] = std::conj(spec_l[b]);
                spec_r[fft_len_ - b] = std::conj(spec_r[b]);
            }
        }
        fft_.inverse(spec_l);
        fft_.inverse(spec_r);

        // Overlap-add: the frame spans [pos-120, pos+640); emit the first 640
        // samples (520 on the very first call, where the leading 120 predate
        // the stream) and carry the trailing 120.
        const std::size_t span = kSeparatorWindow;
        std::vector<double> acc_l(span, 0.0), acc_r(span, 0.0), norm(span, 0.0);
        for (std::size_t i = 0; i < kSeparatorHistory; ++i) {
            acc_l[i] = tail_l_[i];
            acc_r[i] = tail_r_[i];
            norm[i] = tail_norm_[i];
        }
        for (std::size_t i = 0; i < span; ++i) {
            acc_l[i] += synthesis_[i] * spec_l[i].real();
            acc_r[i] += synthesis_[i] * spec_r[i].real();
            norm[i] += synthesis_[i] * window_[i];
        }

        const std::size_t skip = first_chunk_ ? kSeparatorHistory : 0;
        first_chunk_ = false;
        BinauralBuffer out = BinauralBuffer::zeros(kSeparatorHop - skip);
        for (std::size_t i = skip; i < kSeparatorHop; ++i) {
            const double d = std::max(norm[i], kNormFloor);
            out.left.samples[i - skip] = static_cast<float>(acc_l[i] / d);
            out.right.samples[i - skip] = static_cast<float>(acc_r[i] / d);
        }
        for (std::size_t i = 0; i < kSeparatorHistory; ++i) {
            tail_l_[i] = acc_l[kSeparatorHop + i];
            tail_r_[i] = acc_r[kSeparatorHop + i];
            tail_norm_[i] = norm[kSeparatorHop + i];
        }

        for (std::size_t i = 0; i < kSeparatorHistory; ++i) {
            hist_l_[i] = chunk.left.samples[kSeparatorHop - kSeparatorHistory + i];
            hist_r_[i] = chunk.right.samples[kSeparatorHop - kSeparatorHistory + i];
        }
        return out;
    }

    BinauralBuffer flush() override {
        if (first_chunk_) return {};
        BinauralBuffer out = BinauralBuffer::zeros(kSeparatorHistory);
        for (std::size_t i = 0; i < kSeparatorHistory; ++i) {
            const double d = std::max(tail_norm_[i], kNormFloor);
            out.left.samples[i] = static_cast<float>(tail_l_[i] / d);
            out.right.samples[i] = static_cast<float>(tail_r_[i] / d);
        }
        std::fill(tail_l_.begin(), tail_l_.end(), 0.0);
        std::fill(tail_r_.begin(), tail_r_.end(), 0.0);
        std::fill(tail_norm_.begin(), tail_norm_.end(), 0.0);
        return out;
    }

    bool output_aligned() const override { return true; }

    // Masked spectra spread energy beyond the analysis envelope; flooring
    // the overlap-add normalizer keeps that spread from being amplified at
    // positions where the window sum is small (notably the flush tail).
    static constexpr double kNormFloor = 0.1;

private:
    std::vector<std::complex<double>> analyze(const std::vector<float>& hist,
                                              const MonoBuffer& chunk) {
        std::vector<std::complex<double>> buf(fft_len_, {0.0, 0.0});
        for (std::size_t i = 0; i < kSeparatorHistory; ++i)
            buf[i] = {window_[i] * hist[i], 0.0};
        for (std::size_t i = 0; i < kSeparatorHop; ++i)
            buf[kSeparatorHistory + i] =
                {window_[kSeparatorHistory + i] * chunk.samples[i], 0.0};
        fft_.forward(buf);
        return buf;
    }

    double threshold_;
    double floor_;
    std::size_t fft_len_;
    std::size_t smooth_halfwidth_;
    double time_ema_;
    Fft fft_;
    std::vector<double> window_;
    std::vector<double> synthesis_;
    std::vector<float> hist_l_, hist_r_;
    std::vector<double> prev_mask_;
    std::vector<double> tail_l_, tail_r_, tail_norm_;
    bool first_chunk_ = true;
};

inline SeparatorFactory phase_mask_separator_factory(const LocsepConfig& cfg) {
    const double tau = cfg.phase_mask_threshold_rad;
    const double floor = cfg.phase_mask_floor;
    const std::size_t hw = cfg.phase_mask_smooth_bins;
    const double ema = cfg.phase_mask_time_ema;
    return [tau, floor, hw, ema]() {
        return std::make_unique<PhaseMaskSeparator>(tau, floor, 1024, hw, ema);
    };
}

struct CandidateSource {
    double angle_deg = 0.0;
    BinauralBuffer stem;
    double energy = 0.0;  // mean squared amplitude over both channels
};

struct SourceEstimate {
    double angle_deg = 0.0;
    BinauralBuffer stem;
    double energy = 0.0;
};

// Streams a buffer through one separator in 640-sample chunks (the last one
// zero-padded) and returns the concatenated output trimmed to input length.
inline BinauralBuffer run_separator(Separator& sep, const BinauralBuffer& aligned,
                                    double target_angle_deg) {
    const std::size_t n = aligned.size();
    const std::size_t n_chunks = (n + kSeparatorHop - 1) / kSeparatorHop;
    BinauralBuffer out;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        const BinauralBuffer chunk = aligned.slice(c * kSeparatorHop, kSeparatorHop);
        BinauralBuffer piece = sep.process(chunk, target_angle_deg);
        out.left.samples.insert(out.left.samples.end(), piece.left.samples.begin(),
                                piece.left.samples.end());
        out.right.samples.insert(out.right.samples.end(), piece.right.samples.begin(),
                                 piece.right.samples.end());
    }
    BinauralBuffer rest = sep.flush();
    out.left.samples.insert(out.left.samples.end(), rest.left.samples.begin(),
                            rest.left.samples.end());
    out.right.samples.insert(out.right.samples.end(), rest.right.samples.begin(),
                             rest.right.samples.end());
    out.left.samples.resize(n, 0.0f);
    out.right.samples.resize(n, 0.0f);
    return out;
}

// Runs the separator at every bin center: align, stream, gate. Surviving
// outputs become candidates with their energy recorded. A failing bin yields
// no candidate and one diagnostics line.
inline std::vector<CandidateSource> search(const BinauralBuffer& x,
                                           const LocsepConfig& cfg,
                                           const SeparatorFactory& make_separator) {
    cfg.validate();
    const std::size_t n_bins = cfg.grid.n_bins;
    std::vector<std::unique_ptr<CandidateSource>> slots(n_bins);

    auto run_bin = [&](std::size_t bin) {
        const double angle = cfg.grid.center_deg(bin);
        try {
            const BinauralBuffer aligned = align_to_angle(x, angle, cfg.geometry);
            auto sep = make_separator();
            BinauralBuffer stem = run_separator(*sep, aligned, angle);
            if (sep->output_aligned())
                stem.right = fractional_delay(stem.right,
                                              tdoa_seconds(angle, cfg.geometry));
            if (!power_gate(stem, cfg.power_threshold, cfg.gate_window_s)) return;
            auto cand = std::make_unique<CandidateSource>();
            cand->angle_deg = angle;
            cand->energy = stem.mean_square();
            cand->stem = std::move(stem);
            slots[bin] = std::move(cand);
        } catch (const std::exception& e) {
            if (cfg.diagnostics)
                cfg.diagnostics("search: bin " + std::to_string(bin) + " (" +
                                std::to_string(angle) + " deg) failed: " + e.what());
        }
    };

    if (cfg.parallel) {
        const std::size_t n_workers =
            std::min<std::size_t>(n_bins, std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < n_workers; ++w)
            workers.emplace_back([&, w]() {
                for (std::size_t bin = w; bin < n_bins; bin += n_workers) run_bin(bin);
            });
        for (auto& t : workers) t.join();
    } else {
        for (std::size_t bin = 0; bin < n_bins; ++bin) run_bin(bin);
    }

    std::vector<CandidateSource> candidates;
    for (auto& slot : slots)
        if (slot) candidates.push_back(std::move(*slot));
    return candidates;
}

// Fraction of 0.75 s segments whose left-channel normalized correlation
// (max over +/-1 ms) reaches the per-segment threshold, compared only over
// segments where both stems pass the power gate.
inline double segmentwise_similarity(const BinauralBuffer& a, const BinauralBuffer& b,
                                     const LocsepConfig& cfg) {
    const std::size_t seg =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg.sim_segment_s * kSampleRate));
    const std::size_t n = std::min(a.size(), b.size());
    std::size_t compared = 0, similar = 0;
    for (std::size_t start = 0; start < n; start += seg) {
        const std::size_t len = std::min(seg, n - start);
        if (len < seg / 2 && compared > 0) break;  // ignore a short trailing scrap
        const BinauralBuffer sa = a.slice(start, len);
        const BinauralBuffer sb = b.slice(start, len);
        if (!power_gate(sa, cfg.power_threshold, cfg.gate_window_s) ||
            !power_gate(sb, cfg.power_threshold, cfg.gate_window_s))
            continue;
        ++compared;
        if (xcorr_peak_value(sa.left, sb.left, cfg.sim_max_lag_s) >=
            cfg.sim_corr_threshold)
            ++similar;
    }
    if (compared == 0) return 0.0;
    return static_cast<double>(similar) / static_cast<double>(compared);
}

// Orders candidates by descending energy and greedily accepts each as a new
// cluster unless its segment-wise similarity with an existing cluster is
// high (fraction >= sim_fraction).
inline std::vector<SourceEstimate> cluster(std::vector<CandidateSource> candidates,
                                           const LocsepConfig& cfg) {
    std::sort(candidates.begin(), candidates.end(),
              [](const CandidateSource& a, const CandidateSource& b) {
                  if (a.energy != b.energy) return a.energy > b.energy;
                  return a.angle_deg < b.angle_deg;
              });
    std::vector<SourceEstimate> clusters;
    for (auto& cand : candidates) {
        bool duplicate = false;
        for (const auto& c : clusters) {
            if (segmentwise_similarity(cand.stem, c.stem, cfg) >= cfg.sim_fraction) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate)
            clusters.push_back({cand.angle_deg, std::move(cand.stem), cand.energy});
    }
    return clusters;
}

inline std::vector<SourceEstimate> localize_and_separate(
    const BinauralBuffer& x, const LocsepConfig& cfg,
    const SeparatorFactory& make_separator) {
    return cluster(search(x, cfg, make_separator), cfg);
}

}  // namespace binaura
