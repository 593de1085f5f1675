// brir.hpp -- binaural room impulse response sets and their JSON manifests.
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/audio.hpp"
#include "binaura/dsp.hpp"
#include "binaura/geometry.hpp"
#include "binaura/wav.hpp"

namespace binaura {

struct BrirEntry {
    double azimuth_deg = 0.0;  // [0, 360)
    double elevation_deg = 0.0;
    BinauralBuffer ir;
};

// One room/wearer configuration: a list of impulse response pairs indexed by
// direction. Lookups fall back to the nearest azimuth when the requested
// angle is not tabulated.
struct BrirSet {
    std::string name;
    std::string source_tag;
    std::vector<BrirEntry> entries;

    void validate() const {
        std::vector<std::pair<double, double>> keys;
        std::vector<double> azimuths;
        for (const auto& e : entries) {
            if (e.ir.empty()) throw InvalidSpec("BrirSet: empty impulse response");
            if (!e.ir.left.all_finite() || !e.ir.right.all_finite())
                throw InvalidSpec("BrirSet: non-finite impulse response");
            keys.emplace_back(e.azimuth_deg, e.elevation_deg);
            azimuths.push_back(e.azimuth_deg);
        }
        std::sort(keys.begin(), keys.end());
        if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
            throw InvalidSpec("BrirSet: duplicate (azimuth, elevation) key");
        std::sort(azimuths.begin(), azimuths.end());
        azimuths.erase(std::unique(azimuths.begin(), azimuths.end()), azimuths.end());
        if (azimuths.size() < 2)
            throw InvalidSpec("BrirSet: need at least two distinct azimuths");
    }

    // Largest wrapped gap between consecutive tabulated azimuths.
    double azimuth_resolution_deg() const {
        std::vector<double> az;
        for (const auto& e : entries) az.push_back(wrap_degrees(e.azimuth_deg));
        std::sort(az.begin(), az.end());
        az.erase(std::unique(az.begin(), az.end()), az.end());
        if (az.size() < 2) return 360.0;
        double worst = 0.0;
        for (std::size_t i = 0; i < az.size(); ++i) {
            const double next = i + 1 < az.size() ? az[i + 1] : az[0] + 360.0;
            worst = std::max(worst, next - az[i]);
        }
        return worst;
    }

    const BrirEntry& nearest(double azimuth_deg, double elevation_deg = 0.0) const {
        if (entries.empty()) throw MissingAsset("BrirSet: no entries");
        const BrirEntry* best = &entries.front();
        double best_cost = 1e18;
        for (const auto& e : entries) {
            const double cost = wrapped_distance_deg(e.azimuth_deg, azimuth_deg) +
                                0.01 * std::fabs(e.elevation_deg - elevation_deg);
            if (cost < best_cost) {
                best_cost = cost;
                best = &e;
            }
        }
        return *best;
    }

    bool has_exact(double azimuth_deg, double elevation_deg = 0.0) const {
        for (const auto& e : entries)
            if (wrapped_distance_deg(e.azimuth_deg, azimuth_deg) < 1e-9 &&
                std::fabs(e.elevation_deg - elevation_deg) < 1e-9)
                return true;
        return false;
    }
};

// Parameters for the self-contained synthetic sets used by tests and the
// acceptance scenes: per angle, a pure fractional delay realizing the
// physical TDoA plus a level difference shaped as ild_scale_db * sin(az).
struct SyntheticBrirParams {
    std::size_t n_azimuths = 36;
    double ild_scale_db = 6.0;      // broadband ILD magnitude at +/-90 degrees
    double ild_jitter_db = 0.0;     // deterministic per-angle perturbation
    double direct_gain = 0.9;
    long base_delay_samples = 64;   // shared acoustic path delay
    std::uint64_t seed = 0;
    ArrayGeometry geometry;
};

// All-positive Gaussian interpolation taps realizing a fractional delay.
// Linear phase by symmetry (exact group delay at every frequency), and with
// unit L1 the response's L1 norm equals its gain, which keeps L1-based ILD
// formulas exact. The mild common rolloff cancels in inter-channel ratios.
inline std::vector<double> gaussian_delay_taps(double delay_samples, long first_tap,
                                               std::size_t count, double sigma = 0.65) {
    std::vector<double> taps(count);
    double l1 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(first_tap + static_cast<long>(i)) -
                         delay_samples;
        taps[i] = std::exp(-0.5 * t * t / (sigma * sigma));
        l1 += taps[i];
    }
    for (double& t : taps) t /= l1;
    return taps;
}

inline BinauralBuffer make_delay_level_ir(double azimuth_deg, double ild_db,
                                          double gain, long base_delay,
                                          const ArrayGeometry& geom = {}) {
    const double tdoa_samples = tdoa_seconds(azimuth_deg, geom) * kSampleRate;
    const double dl = static_cast<double>(base_delay);
    const double dr = dl + tdoa_samples;
    constexpr long kHalf = 5;
    const long fl = std::lround(dl) - kHalf;
    const long fr = std::lround(dr) - kHalf;
    const auto kl = gaussian_delay_taps(dl, fl, 2 * kHalf + 1);
    const auto kr = gaussian_delay_taps(dr, fr, 2 * kHalf + 1);
    const std::size_t ir_len = static_cast<std::size_t>(base_delay) + 32;
    MonoBuffer left = MonoBuffer::zeros(ir_len);
    MonoBuffer right = MonoBuffer::zeros(ir_len);
    const double gl = gain * db_to_linear(0.5 * ild_db);
    const double gr = gain * db_to_linear(-0.5 * ild_db);
    for (std::size_t i = 0; i < kl.size(); ++i) {
        const long tl = fl + static_cast<long>(i);
        if (tl >= 0 && tl < static_cast<long>(ir_len))
            left.samples[tl] = static_cast<float>(gl * kl[i]);
        const long tr = fr + static_cast<long>(i);
        if (tr >= 0 && tr < static_cast<long>(ir_len))
            right.samples[tr] = static_cast<float>(gr * kr[i]);
    }
    return BinauralBuffer(std::move(left), std::move(right));
}

inline BrirSet make_synthetic_brir_set(const std::string& name,
                                       const SyntheticBrirParams& p = {}) {
    BrirSet set;
    set.name = name;
    set.source_tag = "synthetic-delay-level";
    const double step = 360.0 / static_cast<double>(p.n_azimuths);
    for (std::size_t i = 0; i < p.n_azimuths; ++i) {
        const double az = static_cast<double>(i) * step;
        double jitter = 0.0;
        if (p.ild_jitter_db > 0.0) {
            std::mt19937_64 rng(mix_seed(p.seed, i));
            jitter = std::uniform_real_distribution<double>(-p.ild_jitter_db,
                                                            p.ild_jitter_db)(rng);
        }
        const double ild = p.ild_scale_db * std::sin(az * kPi / 180.0) + jitter;
        BrirEntry e;
        e.azimuth_deg = az;
        e.elevation_deg = 0.0;
        e.ir = make_delay_level_ir(az, ild, p.direct_gain, p.base_delay_samples,
                                   p.geometry);
        set.entries.push_back(std::move(e));
    }
    set.validate();
    return set;
}

// Manifest format: {"name": ..., "source_tag": ..., "entries":
//   [{"az": deg, "el": deg, "path": "ir.wav"}, ...]} with stereo WAV assets.
inline void save_brir_manifest(const BrirSet& set, const std::string& dir,
                               const std::string& manifest_path) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["name"] = set.name;
    j["source_tag"] = set.source_tag;
    j["entries"] = nlohmann::json::array();
    int index = 0;
    for (const auto& e : set.entries) {
        const std::string rel = set.name + "_" + std::to_string(index++) + ".wav";
        const std::string path = dir + "/" + rel;
        wav_write(path, e.ir, WavEncoding::Float32);
        j["entries"].push_back({{"az", e.azimuth_deg},
                                {"el", e.elevation_deg},
                                {"path", path}});
    }
    std::ofstream f(manifest_path);
    if (!f) throw Error("save_brir_manifest: cannot open " + manifest_path);
    f << j.dump(2) << "\n";
}

inline BrirSet load_brir_manifest(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw MissingAsset("load_brir_manifest: cannot open " + manifest_path);
    nlohmann::json j;
    f >> j;
    BrirSet set;
    set.name = j.value("name", "brir");
    set.source_tag = j.value("source_tag", "");
    for (const auto& je : j.at("entries")) {
        BrirEntry e;
        e.azimuth_deg = je.at("az").get<double>();
        e.elevation_deg = je.value("el", 0.0);
        e.ir = wav_read_binaural(je.at("path").get<std::string>());
        set.entries.push_back(std::move(e));
    }
    set.validate();
    return set;
}

}  // namespace binaura
