// geometry.hpp -- two-microphone array geometry and the angular search grid.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "binaura/common.hpp"

namespace binaura {

// Far-field two-microphone model: one mic at each ear.
struct ArrayGeometry {
    double mic_distance_m = 0.18;  // average head width
    double sound_speed_mps = 340.0;

    void validate() const {
        if (mic_distance_m <= 0.0 || sound_speed_mps <= 0.0)
            throw ConfigError("ArrayGeometry: distance and speed must be positive");
    }
};

// Time difference of arrival for a source at `angle_deg`:
//   tdoa = d * sin(theta) / c
// Positive values mean the right channel lags the left. Azimuths with
// sin(theta) > 0 place the source on the far side from the right microphone.
inline double tdoa_seconds(double angle_deg, const ArrayGeometry& geom = {}) {
    return geom.mic_distance_m * std::sin(angle_deg * kPi / 180.0) /
           geom.sound_speed_mps;
}

// Uniform azimuth grid with bin centers {0, step, 2*step, ...}.
struct AngularGrid {
    std::size_t n_bins = 36;

    void validate() const {
        if (n_bins == 0 || 360 % n_bins != 0)
            throw ConfigError("AngularGrid: 360 must be divisible by n_bins");
    }

    double step_deg() const { return 360.0 / static_cast<double>(n_bins); }
    double half_bin_deg() const { return 180.0 / static_cast<double>(n_bins); }

    double center_deg(std::size_t bin) const {
        return static_cast<double>(bin) * step_deg();
    }

    // Every azimuth in [0, 360) maps to exactly one bin.
    std::size_t bin_of(double angle_deg) const {
        const double step = step_deg();
        auto bin = static_cast<long>(std::lround(wrap_degrees(angle_deg) / step));
        return static_cast<std::size_t>(bin) % n_bins;
    }

    std::vector<double> centers() const {
        std::vector<double> c(n_bins);
        for (std::size_t i = 0; i < n_bins; ++i) c[i] = center_deg(i);
        return c;
    }
};

}  // namespace binaura
