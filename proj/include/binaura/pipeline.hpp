// pipeline.hpp -- end-to-end streaming scheduler: 40 ms separation hops, a
// 960 ms translation stub per source, renderers honoring the delay
// reconciliation rule, plus the RTF profiling harness.
#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/locsep.hpp"
#include "binaura/render.hpp"

namespace binaura {

struct ChunkSchedule {
    std::size_t sep_hop = 640;        // 40 ms
    std::size_t trans_chunk = 15360;  // 960 ms
    std::size_t delay_chunks = 0;     // D, in translation chunks

    std::size_t hops_per_chunk() const { return trans_chunk / sep_hop; }

    void validate() const {
        if (sep_hop == 0 || trans_chunk == 0 || trans_chunk % sep_hop != 0)
            throw ConfigError("ChunkSchedule: trans_chunk must be a multiple of sep_hop");
    }
};

// Consumes source blocks (one translation chunk each) and emits output
// blocks after a fixed latency of delay_chunks blocks.
class TranslatorStub {
public:
    virtual ~TranslatorStub() = default;
    virtual std::vector<MonoBuffer> push(const MonoBuffer& block) = 0;
    virtual std::vector<MonoBuffer> flush() = 0;
};

enum class TranslatorMode { Identity, Timewarp };

// identity: emits each block D blocks late, unchanged. timewarp: linearly
// resamples each block's content by `rate` (emulating translated speech of a
// different duration) and zero-pads back to the block size.
class DelayTranslator : public TranslatorStub {
public:
    DelayTranslator(std::size_t delay_chunks, TranslatorMode mode = TranslatorMode::Identity,
                    double rate = 1.0)
        : delay_(delay_chunks), mode_(mode), rate_(rate) {
        if (mode == TranslatorMode::Timewarp && (rate < 0.8 || rate > 1.25))
            throw ConfigError("DelayTranslator: timewarp rate outside [0.8, 1.25]");
    }

    std::vector<MonoBuffer> push(const MonoBuffer& block) override {
        queue_.push_back(transform(block));
        std::vector<MonoBuffer> out;
        if (queue_.size() > delay_) {
            out.push_back(std::move(queue_.front()));
            queue_.erase(queue_.begin());
        }
        return out;
    }

    std::vector<MonoBuffer> flush() override {
        std::vector<MonoBuffer> out = std::move(queue_);
        queue_.clear();
        return out;
    }

private:
    MonoBuffer transform(const MonoBuffer& block) const {
        if (mode_ == TranslatorMode::Identity) return block;
        const auto content =
            static_cast<std::size_t>(static_cast<double>(block.size()) / rate_);
        MonoBuffer out = MonoBuffer::zeros(block.size());
        for (std::size_t i = 0; i < std::min(content, block.size()); ++i) {
            const double src = static_cast<double>(i) * rate_;
            const auto lo = static_cast<std::size_t>(src);
            const double frac = src - static_cast<double>(lo);
            const double a = lo < block.size() ? block.samples[lo] : 0.0;
            const double b = lo + 1 < block.size() ? block.samples[lo + 1] : 0.0;
            out.samples[i] = static_cast<float>(a * (1.0 - frac) + b * frac);
        }
        return out;
    }

    std::size_t delay_;
    TranslatorMode mode_;
    double rate_;
    std::vector<MonoBuffer> queue_;
};

using TranslatorFactory = std::function<std::unique_ptr<TranslatorStub>(void)>;

inline TranslatorFactory delay_translator_factory(std::size_t delay_chunks,
                                                  TranslatorMode mode = TranslatorMode::Identity,
                                                  double rate = 1.0) {
    return [=]() { return std::make_unique<DelayTranslator>(delay_chunks, mode, rate); };
}

enum class MonoDownmix { Left, Mid };

struct PipelineConfig {
    LocsepConfig locsep;
    ChunkSchedule schedule;
    RenderMethod method = RenderMethod::GenericHrtfIldComp;
    MonoDownmix downmix = MonoDownmix::Left;
    double retire_after_s = 2.0;  // drop a source after this much gated silence
};

struct PipelineSource {
    std::size_t id = 0;
    double angle_deg = 0.0;             // median of per-block angles
    std::vector<double> block_angles;   // angle per active block
    std::size_t first_block = 0;
    BinauralBuffer stem;    // separated, mixture timeline (gaps zero-filled)
    BinauralBuffer render;  // reconciled binaural render of the stub output
    double energy = 0.0;
};

struct PipelineResult {
    std::vector<PipelineSource> sources;
    std::size_t hops_consumed = 0;
    std::size_t blocks_processed = 0;
    std::size_t hops_per_block = 0;
    std::vector<std::string> diagnostics;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MonoBuffer downmix(const BinauralBuffer& b, MonoDownmix mode) {
    if (mode == MonoDownmix::Left) return b.left;
    MonoBuffer out = MonoBuffer::zeros(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        out.samples[i] = 0.5f * (b.left.samples[i] + b.right.samples[i]);
    return out;
}

struct LiveSource {
    std::size_t id;
    PipelineSource out;
    std::unique_ptr<TranslatorStub> stub;
    std::unique_ptr<ReconcilingRenderer> renderer;
    std::optional<SpatialCues> last_cues;
    double last_angle = 0.0;
    double silent_s = 0.0;
    bool retired = false;
    bool render_started = false;
};

}  // namespace detail

// Streams a mixture through per-bin separators in 40 ms hops; every 960 ms
// block, gates and clusters the per-bin outputs, maintains source lifecycle
// (new sources get a fresh translator stub; sources gated silent for
// retire_after_s are retired), feeds each source's mono downmix to its stub,
// and renders stub output with the cues of the block in which it emerges.
inline PipelineResult run_pipeline(const BinauralBuffer& mixture,
                                   const PipelineConfig& cfg,
                                   const SeparatorFactory& make_separator,
                                   const TranslatorFactory& make_translator,
                                   const GenericHrtfTable* table) {
    cfg.schedule.validate();
    cfg.locsep.validate();
    if (cfg.method != RenderMethod::Duplicate && table == nullptr)
        throw ConfigError("run_pipeline: render method requires an HRTF table");

    PipelineResult result;
    result.hops_per_block = cfg.schedule.hops_per_chunk();
    const std::size_t n = mixture.size();
    if (n == 0) return result;

    LocsepConfig locsep = cfg.locsep;
    locsep.diagnostics = [&result](const std::string& m) { result.diagnostics.push_back(m); };
    const std::size_t n_bins = locsep.grid.n_bins;
    const std::size_t hop = cfg.schedule.sep_hop;
    const std::size_t block_len = cfg.schedule.trans_chunk;
    const std::size_t n_hops = (n + hop - 1) / hop;
    const std::size_t padded = n_hops * hop;

    // Per-bin state: aligned input stream and a persistent separator.
    struct BinState {
        BinauralBuffer aligned;
        std::unique_ptr<Separator> sep;
        BinauralBuffer out;
        double angle = 0.0;
        double tdoa = 0.0;
    };
    std::vector<BinState> bins(n_bins);
    BinauralBuffer padded_mix = mixture;
    padded_mix.pad_to(padded);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].angle = locsep.grid.center_deg(b);
        bins[b].tdoa = tdoa_seconds(bins[b].angle, locsep.geometry);
        bins[b].aligned = align_to_angle(padded_mix, bins[b].angle, locsep.geometry);
        bins[b].sep = make_separator();
    }

    std::vector<detail::LiveSource> sources;
    std::size_t next_id = 0;

    auto append_bb = [](BinauralBuffer& dst, const BinauralBuffer& piece) {
        dst.left.samples.insert(dst.left.samples.end(), piece.left.samples.begin(),
                                piece.left.samples.end());
        dst.right.samples.insert(dst.right.samples.end(), piece.right.samples.begin(),
                                 piece.right.samples.end());
    };

    auto process_block = [&](std::size_t block_index, std::size_t block_start,
                             std::size_t block_stop) {
        // Per-bin candidate over this block, gated; then clustered.
        std::vector<CandidateSource> candidates;
        for (std::size_t b = 0; b < n_bins; ++b) {
            if (bins[b].out.size() < block_stop) continue;
            BinauralBuffer stem = bins[b].out.slice(block_start, block_stop - block_start);
            if (bins[b].sep->output_aligned())
                stem.right = fractional_delay(stem.right, bins[b].tdoa);
            if (!power_gate(stem, locsep.power_threshold, locsep.gate_window_s)) continue;
            CandidateSource cand;
            cand.angle_deg = locsep.grid.center_deg(b);
            cand.energy = stem.mean_square();
            cand.stem = std::move(stem);
            candidates.push_back(std::move(cand));
        }
        std::vector<SourceEstimate> estimates = cluster(std::move(candidates), locsep);

        // Match estimates to live sources by angle, within one grid step.
        std::vector<bool> source_hit(sources.size(), false);
        for (auto& est : estimates) {
            detail::LiveSource* match = nullptr;
            double best = locsep.grid.step_deg() + 1e-9;
            for (std::size_t s = 0; s < sources.size(); ++s) {
                if (sources[s].retired || source_hit[s]) continue;
                const double d = wrapped_distance_deg(sources[s].last_angle, est.angle_deg);
                if (d <= best) {
                    best = d;
                    match = &sources[s];
                }
            }
            if (match == nullptr) {
                detail::LiveSource fresh;
                fresh.id = next_id++;
                fresh.out.id = fresh.id;
                fresh.out.first_block = block_index;
                fresh.out.stem = BinauralBuffer::zeros(block_start);
                fresh.stub = make_translator();
                fresh.renderer = std::make_unique<ReconcilingRenderer>(cfg.method, table);
                fresh.last_angle = est.angle_deg;
                sources.push_back(std::move(fresh));
                match = &sources.back();
                source_hit.push_back(true);
            } else {
                source_hit[&*match - sources.data()] = true;
            }

            match->silent_s = 0.0;
            match->last_angle = est.angle_deg;
            match->out.block_angles.push_back(est.angle_deg);
            match->out.energy += est.energy;

            SpatialCues cues;
            try {
                CueOptions copts;
                copts.power_threshold = locsep.power_threshold;
                copts.gate_window_s = locsep.gate_window_s;
                if (table != nullptr) {
                    cues = extract_cues(est.stem, est.angle_deg, *table, copts);
                } else {
                    cues.angle_deg = est.angle_deg;
                    cues.ild_linear = ild_linear_ratio(est.stem);
                }
                match->last_cues = cues;
            } catch (const SilentStem&) {
                cues = match->last_cues.value_or(SpatialCues{est.angle_deg, 1.0, 0.0, {}});
            }

            match->out.stem.pad_to(block_start);
            append_bb(match->out.stem, est.stem);

            const MonoBuffer mono = detail::downmix(est.stem, cfg.downmix);
            for (const MonoBuffer& emitted : match->stub->push(mono)) {
                // The render sits on the block timeline: output for the
                // block emerging at tick b starts at b * block_len, so the
                // translator's latency becomes leading silence.
                if (!match->render_started) {
                    match->out.render = BinauralBuffer::zeros(block_start);
                    match->render_started = true;
                }
                append_bb(match->out.render, match->renderer->push(emitted, cues));
            }
        }

        const double block_s = static_cast<double>(block_stop - block_start) / kSampleRate;
        for (std::size_t s = 0; s < sources.size(); ++s) {
            if (sources[s].retired || source_hit[s]) continue;
            sources[s].silent_s += block_s;
            if (sources[s].silent_s >= cfg.retire_after_s) sources[s].retired = true;
        }
        ++result.blocks_processed;
    };

    // A block is clustered as soon as every bin's separator has emitted
    // samples covering it (separators may trail their input by a partial
    // chunk of internal latency).
    std::size_t next_block = 0;
    auto process_ready_blocks = [&]() {
        while (next_block * block_len < n) {
            const std::size_t block_start = next_block * block_len;
            const std::size_t block_stop = std::min(n, block_start + block_len);
            bool ready = true;
            for (const auto& bin : bins)
                if (bin.out.size() < block_stop) ready = false;
            if (!ready) break;
            process_block(next_block, block_start, block_stop);
            ++next_block;
        }
    };

    for (std::size_t h = 0; h < n_hops; ++h) {
        for (auto& bin : bins) {
            const BinauralBuffer chunk = bin.aligned.slice(h * hop, hop);
            append_bb(bin.out, bin.sep->process(chunk, bin.angle));
        }
        ++result.hops_consumed;
        process_ready_blocks();
    }
    for (auto& bin : bins) {
        append_bb(bin.out, bin.sep->flush());
        bin.out.pad_to(padded);
    }
    process_ready_blocks();

    // Drain stubs; leftover blocks render with the latest cues.
    for (auto& src : sources) {
        const SpatialCues cues =
            src.last_cues.value_or(SpatialCues{src.last_angle, 1.0, 0.0, {}});
        for (const MonoBuffer& emitted : src.stub->flush())
            append_bb(src.out.render, src.renderer->push(emitted, cues));
        append_bb(src.out.render, src.renderer->flush());
        src.out.stem.pad_to(n);
        src.out.stem.left.samples.resize(n);
        src.out.stem.right.samples.resize(n);
        src.out.angle_deg = detail::median_of(src.out.block_angles);
        if (!src.out.block_angles.empty())
            src.out.energy /= static_cast<double>(src.out.block_angles.size());
        result.sources.push_back(std::move(src.out));
    }
    return result;
}

// --- RTF profiling -----------------------------------------------------------

struct ProfiledStage {
    std::string name;
    double chunk_ms = 40.0;
    std::function<void(std::size_t)> run;  // called once per chunk index
};

struct StageReport {
    std::string name;
    double chunk_ms = 0.0;
    double mean_runtime_ms = 0.0;
    double rtf = 0.0;
};

struct RtfReport {
    std::vector<StageReport> stages;
    double cumulative_rtf = 0.0;
    std::size_t warmup_chunks = 10;
    std::size_t measured_chunks = 200;
};

// Warm up each stage for `warmup` chunks, then report the mean wall-clock
// runtime over `measure` chunks and the per-stage RTF (runtime / chunk time).
inline RtfReport profile_rtf(const std::vector<ProfiledStage>& stages,
                             std::size_t warmup = 10, std::size_t measure = 200) {
    RtfReport report;
    report.warmup_chunks = warmup;
    report.measured_chunks = measure;
    for (const auto& stage : stages) {
        for (std::size_t i = 0; i < warmup; ++i) stage.run(i);
        double total_ms = 0.0;
        for (std::size_t i = 0; i < measure; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            stage.run(warmup + i);
            const auto t1 = std::chrono::steady_clock::now();
            total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        StageReport s;
        s.name = stage.name;
        s.chunk_ms = stage.chunk_ms;
        s.mean_runtime_ms = total_ms / static_cast<double>(measure);
        s.rtf = s.mean_runtime_ms / stage.chunk_ms;
        report.cumulative_rtf += s.rtf;
        report.stages.push_back(std::move(s));
    }
    return report;
}

inline nlohmann::json rtf_report_to_json(const RtfReport& r) {
    nlohmann::json j;
    j["warmup_chunks"] = r.warmup_chunks;
    j["measured_chunks"] = r.measured_chunks;
    j["cumulative_rtf"] = r.cumulative_rtf;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : r.stages)
        j["stages"].push_back({{"name", s.name},
                               {"chunk_ms", s.chunk_ms},
                               {"mean_runtime_ms", s.mean_runtime_ms},
                               {"rtf", s.rtf}});
    return j;
}

}  // namespace binaura
