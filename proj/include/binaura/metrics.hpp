// metrics.hpp -- the quantitative evaluation suite: SI-SDR(i), source
// counting precision/recall, interaural cue deltas, and the multi-resolution
// spectrogram training loss.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/audio.hpp"
#include "binaura/dsp.hpp"
#include "binaura/render.hpp"
#include "binaura/stft.hpp"

namespace binaura {

inline constexpr double kSiSdrCapDb = 60.0;

// Scale-invariant signal-to-distortion ratio in dB, capped at +60 dB so
// oracle-perfect estimates stay finite.
inline double si_sdr(const MonoBuffer& estimate, const MonoBuffer& reference) {
    if (estimate.size() != reference.size())
        throw InvalidReference("si_sdr: length mismatch");
    double ref_energy = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double s = reference.samples[i];
        ref_energy += s * s;
        dot += static_cast<double>(estimate.samples[i]) * s;
    }
    if (ref_energy <= 0.0)
        throw InvalidReference("si_sdr: zero reference");
    const double alpha = dot / ref_energy;
    double target = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double t = alpha * reference.samples[i];
        const double e = static_cast<double>(estimate.samples[i]) - t;
        target += t * t;
        noise += e * e;
    }
    if (noise <= 0.0 || target / noise > 1e6) return kSiSdrCapDb;
    return std::min(kSiSdrCapDb, 10.0 * std::log10(target / noise));
}

inline double si_sdr(const BinauralBuffer& estimate, const BinauralBuffer& reference) {
    return 0.5 * (si_sdr(estimate.left, reference.left) +
                  si_sdr(estimate.right, reference.right));
}

// Improvement over using the raw mixture as the estimate.
inline double si_sdri(const MonoBuffer& estimate, const MonoBuffer& mixture,
                      const MonoBuffer& reference) {
    return si_sdr(estimate, reference) - si_sdr(mixture, reference);
}

inline double si_sdri(const BinauralBuffer& estimate, const BinauralBuffer& mixture,
                      const BinauralBuffer& reference) {
    return si_sdr(estimate, reference) - si_sdr(mixture, reference);
}

struct MatchedPair {
    std::size_t estimate_index = 0;
    std::size_t truth_index = 0;
    double error_deg = 0.0;
};

struct MatchResult {
    double precision = 1.0;
    double recall = 1.0;
    std::vector<MatchedPair> pairs;

    std::vector<double> angular_errors() const {
        std::vector<double> e;
        for (const auto& p : pairs) e.push_back(p.error_deg);
        return e;
    }
};

// Greedy nearest-wrapped-angle matching within tolerance. An unmatched
// estimate is a false positive; an unmatched truth a false negative.
inline MatchResult count_match(const std::vector<double>& estimates_deg,
                               const std::vector<double>& truths_deg,
                               double tolerance_deg = 5.0) {
    struct Pairing {
        double error;
        std::size_t e, t;
    };
    std::vector<Pairing> all;
    for (std::size_t e = 0; e < estimates_deg.size(); ++e)
        for (std::size_t t = 0; t < truths_deg.size(); ++t)
            all.push_back({wrapped_distance_deg(estimates_deg[e], truths_deg[t]), e, t});
    std::sort(all.begin(), all.end(), [](const Pairing& a, const Pairing& b) {
        if (a.error != b.error) return a.error < b.error;
        if (a.e != b.e) return a.e < b.e;
        return a.t < b.t;
    });

    MatchResult result;
    std::vector<bool> e_used(estimates_deg.size(), false);
    std::vector<bool> t_used(truths_deg.size(), false);
    for (const auto& p : all) {
        if (p.error > tolerance_deg + 1e-9) break;
        if (e_used[p.e] || t_used[p.t]) continue;
        e_used[p.e] = true;
        t_used[p.t] = true;
        result.pairs.push_back({p.e, p.t, p.error});
    }
    const double matches = static_cast<double>(result.pairs.size());
    result.precision =
        estimates_deg.empty() ? 1.0 : matches / static_cast<double>(estimates_deg.size());
    result.recall =
        truths_deg.empty() ? 1.0 : matches / static_cast<double>(truths_deg.size());
    return result;
}

// |ITD(render) - ITD(reference)| in microseconds, ITDs measured by
// cross-correlation limited to +/- max_lag_s.
inline double delta_itd_us(const BinauralBuffer& render, const BinauralBuffer& reference,
                           double max_lag_s = 1e-3) {
    if (render.mean_square() <= 0.0 || reference.mean_square() <= 0.0)
        throw SilentStem("delta_itd: silent input");
    return std::fabs(itd_seconds(render, max_lag_s) - itd_seconds(reference, max_lag_s)) *
           1e6;
}

// |ILD(render) - ILD(reference)| in dB, ILDs as broadband L1 ratios.
inline double delta_ild_db(const BinauralBuffer& render, const BinauralBuffer& reference) {
    if (render.mean_square() <= 0.0 || reference.mean_square() <= 0.0)
        throw SilentStem("delta_ild: silent input");
    return std::fabs(linear_to_db(ild_linear_ratio(render)) -
                     linear_to_db(ild_linear_ratio(reference)));
}

// --- Multi-resolution spectrogram loss --------------------------------------

struct SpectralResolution {
    std::size_t fft_len;
    std::size_t hop_len;
    std::size_t window_len;
};

inline const std::vector<SpectralResolution>& multires_resolutions() {
    static const std::vector<SpectralResolution> res = {
        {1024, 120, 600}, {2048, 240, 1200}, {512, 50, 240}};
    return res;
}

inline constexpr double kLogMagFloor = 1e-7;

// Spectral convergence + log-magnitude L1, summed over the three
// resolutions. Asymmetric in its arguments: the convergence term normalizes
// by the target's spectral energy.
inline double multires_spec_loss(const MonoBuffer& estimate, const MonoBuffer& target) {
    if (estimate.size() != target.size())
        throw Error("multires_spec_loss: length mismatch");
    double loss = 0.0;
    for (const auto& r : multires_resolutions()) {
        StftConfig cfg;
        cfg.fft_len = r.fft_len;
        cfg.hop_len = r.hop_len;
        cfg.window_len = r.window_len;
        const ComplexSpectrogram se = stft(estimate, cfg);
        const ComplexSpectrogram st = stft(target, cfg);
        double diff_sq = 0.0, target_sq = 0.0, log_l1 = 0.0;
        for (std::size_t i = 0; i < st.data.size(); ++i) {
            const double me = std::abs(se.data[i]);
            const double mt = std::abs(st.data[i]);
            diff_sq += (me - mt) * (me - mt);
            target_sq += mt * mt;
            log_l1 += std::fabs(std::log(std::max(me, kLogMagFloor)) -
                                std::log(std::max(mt, kLogMagFloor)));
        }
        const double convergence =
            std::sqrt(diff_sq) / std::max(std::sqrt(target_sq), kLogMagFloor);
        const double log_mag = log_l1 / static_cast<double>(st.data.size());
        loss += convergence + log_mag;
    }
    return loss;
}

// Full separator training objective: sample-domain L1 plus the weighted
// multi-resolution term.
inline double train_loss(const MonoBuffer& estimate, const MonoBuffer& target,
                         double lambda = 0.1) {
    if (estimate.size() != target.size())
        throw Error("train_loss: length mismatch");
    double l1 = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i)
        l1 += std::fabs(static_cast<double>(estimate.samples[i]) - target.samples[i]);
    l1 /= static_cast<double>(estimate.size());
    return l1 + lambda * multires_spec_loss(estimate, target);
}

// --- Aggregate reports -------------------------------------------------------

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double idx = p / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

// The exact field set emitted by the `eval` command, JSON and CSV.
struct EvalReport {
    double precision = std::numeric_limits<double>::quiet_NaN();
    double recall = std::numeric_limits<double>::quiet_NaN();
    double aoa_median_deg = std::numeric_limits<double>::quiet_NaN();
    double aoa_p90_deg = std::numeric_limits<double>::quiet_NaN();
    double si_sdri_mean_db = std::numeric_limits<double>::quiet_NaN();
    double ditd_mean_us = std::numeric_limits<double>::quiet_NaN();
    double dild_mean_db = std::numeric_limits<double>::quiet_NaN();
    double al_s = std::numeric_limits<double>::quiet_NaN();
    double bleu = std::numeric_limits<double>::quiet_NaN();
};

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    auto put = [&j](const char* key, double v) {
        if (std::isnan(v))
            j[key] = nullptr;
        else
            j[key] = v;
    };
    put("precision", r.precision);
    put("recall", r.recall);
    put("aoa_median_deg", r.aoa_median_deg);
    put("aoa_p90_deg", r.aoa_p90_deg);
    put("si_sdri_mean_db", r.si_sdri_mean_db);
    put("ditd_mean_us", r.ditd_mean_us);
    put("dild_mean_db", r.dild_mean_db);
    put("al_s", r.al_s);
    put("bleu", r.bleu);
    return j;
}

inline std::string eval_report_to_csv(const EvalReport& r) {
    const double vals[] = {r.precision,       r.recall,       r.aoa_median_deg,
                           r.aoa_p90_deg,     r.si_sdri_mean_db, r.ditd_mean_us,
                           r.dild_mean_db,    r.al_s,         r.bleu};
    std::string csv =
        "precision,recall,aoa_median_deg,aoa_p90_deg,si_sdri_mean_db,"
        "ditd_mean_us,dild_mean_db,al_s,bleu\n";
    for (std::size_t i = 0; i < 9; ++i) {
        if (i) csv += ",";
        if (!std::isnan(vals[i])) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6g", vals[i]);
            csv += buf;
        }
    }
    csv += "\n";
    return csv;
}

}  // namespace binaura
