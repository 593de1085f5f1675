// scene.hpp -- synthetic binaural scene construction, static and moving.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "binaura/audio.hpp"
#include "binaura/brir.hpp"
#include "binaura/dsp.hpp"

namespace binaura {

struct StemSpec {
    MonoBuffer audio;
    double gain = 1.0;  // [0.2, 1.0] under the default sampler
};

struct Direction {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
};

struct SceneSpec {
    std::vector<StemSpec> stems;
    std::vector<Direction> angles;
    std::optional<BinauralBuffer> noise;
    bool noise_present = false;
    double noise_gain = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (stems.size() < 2 || stems.size() > 3)
            throw InvalidSpec("SceneSpec: expected 2 or 3 stems");
        if (angles.size() != stems.size())
            throw InvalidSpec("SceneSpec: angles/stems length mismatch");
        for (const auto& s : stems) {
            if (s.audio.empty()) throw MissingAsset("SceneSpec: empty stem audio");
            if (s.gain < 0.2 - 1e-9 || s.gain > 1.0 + 1e-9)
                throw InvalidSpec("SceneSpec: gain outside [0.2, 1.0]");
        }
        for (std::size_t i = 0; i < angles.size(); ++i)
            for (std::size_t j = i + 1; j < angles.size(); ++j)
                if (wrapped_distance_deg(angles[i].azimuth_deg,
                                         angles[j].azimuth_deg) < 1e-9 &&
                    std::fabs(angles[i].elevation_deg - angles[j].elevation_deg) <
                        1e-9)
                    throw InvalidSpec("SceneSpec: duplicate angles");
    }
};

// Mixture plus everything needed to score it: ground-truth post-BRIR stems,
// their azimuths and the noise flag.
struct SceneInstance {
    BinauralBuffer mixture;
    std::vector<BinauralBuffer> stems;
    std::vector<double> truth_angles_deg;
    bool noise_present = false;
    SceneSpec spec;

    double stem_power_db(std::size_t i) const {
        return 10.0 * std::log10(stems[i].mean_square() + 1e-30);
    }
};

// gain * (speech (*) ir) per channel; length = speech + ir - 1.
inline BinauralBuffer spatialize(const MonoBuffer& speech, const BrirEntry& entry,
                                 double gain) {
    if (gain <= 0.0) throw InvalidSpec("spatialize: gain must be positive");
    BinauralBuffer out = convolve(speech, entry.ir);
    out.scale(gain);
    return out;
}

// Emitted when a static scene falls back to a non-tabulated azimuth.
inline void warn_nearest_lookup(const std::string& what, double requested,
                                double used) {
    std::fprintf(stderr,
                 "binaura: %s: azimuth %.1f not tabulated, using nearest %.1f\n",
                 what.c_str(), requested, used);
}

inline SceneInstance synthesize_scene(const SceneSpec& spec, const BrirSet& brirs) {
    spec.validate();
    brirs.validate();

    SceneInstance scene;
    scene.spec = spec;
    scene.noise_present = spec.noise_present;

    std::size_t longest = 0;
    for (std::size_t i = 0; i < spec.stems.size(); ++i) {
        const auto& dir = spec.angles[i];
        const BrirEntry& entry = brirs.nearest(dir.azimuth_deg, dir.elevation_deg);
        if (!brirs.has_exact(dir.azimuth_deg, dir.elevation_deg))
            warn_nearest_lookup("synthesize_scene", dir.azimuth_deg,
                                entry.azimuth_deg);
        BinauralBuffer stem =
            spatialize(spec.stems[i].audio, entry, spec.stems[i].gain);
        longest = std::max(longest, stem.size());
        scene.stems.push_back(std::move(stem));
        scene.truth_angles_deg.push_back(wrap_degrees(dir.azimuth_deg));
    }
    if (spec.noise_present && spec.noise)
        longest = std::max(longest, spec.noise->size());

    // Shorter stems sit at offset 0, zero-padded to the longest.
    scene.mixture = BinauralBuffer::zeros(longest);
    for (auto& stem : scene.stems) {
        stem.pad_to(longest);
        scene.mixture.add(stem);
    }
    if (spec.noise_present) {
        if (!spec.noise) throw MissingAsset("synthesize_scene: noise flag without buffer");
        BinauralBuffer noise = *spec.noise;
        noise.pad_to(longest);
        scene.mixture.add(noise, spec.noise_gain);
    }
    return scene;
}

// Constant-velocity azimuth sweep at zero elevation, advanced in 50 ms steps.
struct MotionTrajectory {
    double start_azimuth_deg = 0.0;
    double angular_velocity_rad_s = 0.0;  // [-pi/2, pi/2]
    static constexpr double kStepSeconds = 0.050;

    void validate() const {
        if (std::fabs(angular_velocity_rad_s) > kPi / 2.0 + 1e-12)
            throw InvalidTrajectory("MotionTrajectory: |velocity| > pi/2 rad/s");
    }

    double azimuth_at(double t_s) const {
        return wrap_degrees(start_azimuth_deg +
                            angular_velocity_rad_s * t_s * 180.0 / kPi);
    }
};

// Moving single-source scene. The signal is split into 50 ms steps, each
// convolved with the nearest-azimuth BRIR, with 10 ms linear cross-fades
// between steps. The per-step ramps sum to one, so zero velocity reproduces
// the static spatialization exactly. Truth angles are the kinematic
// trajectory azimuths at each step start.
inline SceneInstance synthesize_moving_scene(const MonoBuffer& speech,
                                             const MotionTrajectory& traj,
                                             const BrirSet& brirs,
                                             double gain = 1.0) {
    traj.validate();
    brirs.validate();
    if (brirs.azimuth_resolution_deg() > 15.0 + 1e-9)
        throw InvalidSpec("synthesize_moving_scene: BRIR azimuth resolution > 15 deg");
    if (speech.empty()) throw MissingAsset("synthesize_moving_scene: empty speech");

    const std::size_t step_len =
        static_cast<std::size_t>(MotionTrajectory::kStepSeconds * kSampleRate);
    const std::size_t fade_len = static_cast<std::size_t>(0.010 * kSampleRate);
    const std::size_t n_steps = (speech.size() + step_len - 1) / step_len;

    std::size_t ir_len = 0;
    for (const auto& e : brirs.entries) ir_len = std::max(ir_len, e.ir.size());
    const std::size_t out_len = speech.size() + ir_len - 1;

    SceneInstance scene;
    scene.mixture = BinauralBuffer::zeros(out_len);
    BinauralBuffer stem = BinauralBuffer::zeros(out_len);

    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = static_cast<double>(k) * MotionTrajectory::kStepSeconds;
        const double az = traj.azimuth_at(t);
        scene.truth_angles_deg.push_back(az);
        const BrirEntry& entry = brirs.nearest(az, 0.0);

        // Trapezoidal envelope: ramp up over the first fade_len samples of
        // the step (except step 0) and down over the first fade_len samples
        // of the next step.
        const std::size_t start = k * step_len;
        const std::size_t stop = std::min(speech.size(), (k + 1) * step_len);
        const std::size_t tail =
            std::min(speech.size(), stop + (k + 1 < n_steps ? fade_len : 0));

        MonoBuffer seg = MonoBuffer::zeros(tail - start);
        for (std::size_t i = start; i < tail; ++i) {
            double env = 1.0;
            if (k > 0 && i < start + fade_len)
                env = static_cast<double>(i - start + 1) / (fade_len + 1);
            if (i >= stop)
                env = 1.0 - static_cast<double>(i - stop + 1) / (fade_len + 1);
            seg.samples[i - start] = static_cast<float>(env * speech.samples[i]);
        }

        const BinauralBuffer part = spatialize(seg, entry, gain);
        for (std::size_t i = 0; i < part.size() && start + i < out_len; ++i) {
            stem.left.samples[start + i] += part.left.samples[i];
            stem.right.samples[start + i] += part.right.samples[i];
        }
    }

    scene.mixture = stem;
    scene.stems.push_back(std::move(stem));
    scene.noise_present = false;
    return scene;
}

}  // namespace binaura
