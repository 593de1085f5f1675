// dataset.hpp -- reproducible synthetic mixture datasets over a speech
// corpus and BRIR sets, with JSON manifests.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/geometry.hpp"
#include "binaura/scene.hpp"
#include "binaura/wav.hpp"

namespace binaura {

// Sorted .wav listing of a 16 kHz mono corpus directory.
inline std::vector<std::string> load_corpus_dir(const std::string& dir) {
    std::vector<std::string> paths;
    if (std::filesystem::is_directory(dir)) {
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".wav")
                paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw EmptyCorpus("load_corpus_dir: no .wav files in " + dir);
    return paths;
}

struct DatasetRecord {
    std::uint64_t index = 0;
    std::string brir_name;
    std::vector<std::string> source_paths;
    std::vector<double> gains;
    std::vector<double> angles_deg;
    bool noise = false;
    double target_angle_deg = 0.0;   // 60/40 sampled evaluation angle
    bool target_has_source = false;
    std::string mixture_path;
    std::vector<std::string> stem_paths;
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    double noise_prob = 0.5;
    std::vector<DatasetRecord> records;
};

struct DatasetParams {
    std::size_t count = 100;
    double noise_prob = 0.5;
    std::uint64_t seed = 0;
    std::size_t min_stems = 2;
    std::size_t max_stems = 3;
    double min_separation_deg = 20.0;
    double max_clip_s = 8.0;
    double noise_gain = 1.0;
    AngularGrid grid;
};

namespace detail {

inline MonoBuffer clip_to(const MonoBuffer& x, double max_s) {
    const auto cap = static_cast<std::size_t>(max_s * kSampleRate);
    if (x.size() <= cap) return x;
    return x.slice(0, cap);
}

// Deterministic fallback noise when no noise corpus is supplied.
inline BinauralBuffer make_fallback_noise(std::mt19937_64& rng, std::size_t len) {
    std::normal_distribution<double> dist(0.0, 0.02);
    BinauralBuffer n = BinauralBuffer::zeros(len);
    for (std::size_t i = 0; i < len; ++i) {
        n.left.samples[i] = static_cast<float>(dist(rng));
        n.right.samples[i] = static_cast<float>(dist(rng));
    }
    return n;
}

}  // namespace detail

// Samples one record's scene spec. Each record owns an RNG seeded from
// (dataset seed, record index), so generation is order-independent and
// repeat runs are byte-identical.
inline SceneSpec sample_scene_spec(const DatasetParams& p, std::uint64_t index,
                                   const std::vector<std::string>& corpus,
                                   const BrirSet& brirs, DatasetRecord& record) {
    std::mt19937_64 rng(mix_seed(p.seed, index));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t n_stems =
        p.min_stems +
        (p.max_stems > p.min_stems
             ? static_cast<std::size_t>(rng() % (p.max_stems - p.min_stems + 1))
             : 0);

    // Distinct tabulated azimuths, pairwise at least min_separation apart.
    std::vector<double> azimuths;
    for (const auto& e : brirs.entries)
        if (std::fabs(e.elevation_deg) < 1e-9) azimuths.push_back(e.azimuth_deg);
    std::sort(azimuths.begin(), azimuths.end());
    std::vector<double> chosen;
    int guard = 0;
    while (chosen.size() < n_stems) {
        if (++guard > 10000)
            throw InvalidSpec("sample_scene_spec: cannot satisfy angle separation");
        const double az = azimuths[rng() % azimuths.size()];
        bool ok = true;
        for (double c : chosen)
            if (wrapped_distance_deg(c, az) < p.min_separation_deg) ok = false;
        if (ok) chosen.push_back(az);
    }

    SceneSpec spec;
    spec.seed = mix_seed(p.seed, index);
    std::size_t longest = 0;
    for (std::size_t s = 0; s < n_stems; ++s) {
        const std::string& path = corpus[rng() % corpus.size()];
        StemSpec stem;
        stem.audio = detail::clip_to(wav_read_mono(path), p.max_clip_s);
        stem.gain = 0.2 + 0.8 * unit(rng);
        longest = std::max(longest, stem.audio.size());
        spec.stems.push_back(std::move(stem));
        spec.angles.push_back({chosen[s], 0.0});
        record.source_paths.push_back(path);
        record.gains.push_back(spec.stems.back().gain);
        record.angles_deg.push_back(chosen[s]);
    }

    spec.noise_present = unit(rng) < p.noise_prob;
    spec.noise_gain = p.noise_gain;
    if (spec.noise_present)
        spec.noise = detail::make_fallback_noise(rng, longest);
    record.noise = spec.noise_present;

    // Evaluation target angle: 60% an azimuth holding a source, 40% a grid
    // bin with no source within half a bin.
    if (unit(rng) < 0.6) {
        record.target_angle_deg = chosen[rng() % chosen.size()];
        record.target_has_source = true;
    } else {
        std::vector<double> empty_bins;
        for (std::size_t b = 0; b < p.grid.n_bins; ++b) {
            const double c = p.grid.center_deg(b);
            bool occupied = false;
            for (double az : chosen)
                if (wrapped_distance_deg(c, az) <= p.grid.half_bin_deg()) occupied = true;
            if (!occupied) empty_bins.push_back(c);
        }
        record.target_angle_deg =
            empty_bins.empty() ? chosen[0] : empty_bins[rng() % empty_bins.size()];
        record.target_has_source = empty_bins.empty();
    }
    return spec;
}

inline DatasetManifest generate_dataset(const DatasetParams& p,
                                        const std::vector<std::string>& corpus,
                                        const std::vector<BrirSet>& brir_sets,
                                        const std::string& out_dir) {
    if (corpus.empty()) throw EmptyCorpus("generate_dataset: empty corpus");
    if (brir_sets.empty()) throw InvalidSpec("generate_dataset: no BRIR sets");
    std::filesystem::create_directories(out_dir);

    DatasetManifest manifest;
    manifest.seed = p.seed;
    manifest.noise_prob = p.noise_prob;

    for (std::uint64_t i = 0; i < p.count; ++i) {
        DatasetRecord record;
        record.index = i;
        std::mt19937_64 set_rng(mix_seed(p.seed ^ 0x5eedu, i));
        const BrirSet& brirs = brir_sets[set_rng() % brir_sets.size()];
        record.brir_name = brirs.name;

        const SceneSpec spec = sample_scene_spec(p, i, corpus, brirs, record);
        const SceneInstance scene = synthesize_scene(spec, brirs);

        char tag[32];
        std::snprintf(tag, sizeof(tag), "scene_%05llu",
                      static_cast<unsigned long long>(i));
        record.mixture_path = out_dir + "/" + tag + "_mix.wav";
        wav_write(record.mixture_path, scene.mixture, WavEncoding::Float32);
        for (std::size_t s = 0; s < scene.stems.size(); ++s) {
            const std::string path =
                out_dir + "/" + tag + "_stem" + std::to_string(s) + ".wav";
            wav_write(path, scene.stems[s], WavEncoding::Float32);
            record.stem_paths.push_back(path);
        }
        manifest.records.push_back(std::move(record));
    }
    return manifest;
}

inline nlohmann::json dataset_manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["noise_prob"] = m.noise_prob;
    j["records"] = nlohmann::json::array();
    for (const auto& r : m.records) {
        nlohmann::json e;
        e["index"] = r.index;
        e["brir"] = r.brir_name;
        e["sources"] = r.source_paths;
        e["gains"] = r.gains;
        e["angles"] = r.angles_deg;
        e["noise"] = r.noise;
        e["target_angle"] = r.target_angle_deg;
        e["target_has_source"] = r.target_has_source;
        e["mixture_path"] = r.mixture_path;
        e["stem_paths"] = r.stem_paths;
        j["records"].push_back(e);
    }
    return j;
}

inline DatasetManifest dataset_manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.noise_prob = j.value("noise_prob", 0.5);
    for (const auto& e : j.at("records")) {
        DatasetRecord r;
        r.index = e.at("index").get<std::uint64_t>();
        r.brir_name = e.value("brir", "");
        r.source_paths = e.value("sources", std::vector<std::string>{});
        r.gains = e.value("gains", std::vector<double>{});
        r.angles_deg = e.at("angles").get<std::vector<double>>();
        r.noise = e.value("noise", false);
        r.target_angle_deg = e.value("target_angle", 0.0);
        r.target_has_source = e.value("target_has_source", false);
        r.mixture_path = e.at("mixture_path").get<std::string>();
        r.stem_paths = e.value("stem_paths", std::vector<std::string>{});
        m.records.push_back(std::move(r));
    }
    return m;
}

inline void save_dataset_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("save_dataset_manifest: cannot open " + path);
    f << dataset_manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_dataset_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingAsset("load_dataset_manifest: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return dataset_manifest_from_json(j);
}

// Disjoint train/val/test partition of BRIR set indices, by seeded shuffle.
struct BrirSplits {
    std::vector<std::size_t> train, val, test;
};

inline BrirSplits split_brir_sets(std::size_t n_sets, double train_frac,
                                  double val_frac, std::uint64_t seed) {
    if (train_frac < 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
        throw ConfigError("split_brir_sets: bad fractions");
    std::vector<std::size_t> idx(n_sets);
    for (std::size_t i = 0; i < n_sets; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    BrirSplits s;
    const auto n_train = static_cast<std::size_t>(train_frac * n_sets);
    const auto n_val = static_cast<std::size_t>(val_frac * n_sets);
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    return s;
}

}  // namespace binaura
