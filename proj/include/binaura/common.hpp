// common.hpp -- error types, constants and small helpers shared by all modules.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace binaura {

// Everything in this library runs at a fixed 16 kHz rate. Files at any other
// rate are rejected rather than silently resampled.
inline constexpr int kSampleRate = 16000;

inline constexpr double kPi = 3.14159265358979323846;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define BINAURA_ERROR(name)                     \
    struct name : Error {                       \
        using Error::Error;                     \
    }

BINAURA_ERROR(SignalTooShort);
BINAURA_ERROR(DelayOutOfRange);
BINAURA_ERROR(UndefinedCorrelation);
BINAURA_ERROR(UnsupportedRate);
BINAURA_ERROR(UnsupportedLayout);
BINAURA_ERROR(MissingAsset);
BINAURA_ERROR(InvalidSpec);
BINAURA_ERROR(EmptyCorpus);
BINAURA_ERROR(InvalidTrajectory);
BINAURA_ERROR(SilentStem);
BINAURA_ERROR(MissingHrtf);
BINAURA_ERROR(UndefinedLatency);
BINAURA_ERROR(InvalidReference);
BINAURA_ERROR(ConfigError);

#undef BINAURA_ERROR

// Wraps an azimuth to [0, 360).
inline double wrap_degrees(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    return w;
}

// Smallest absolute angular difference between two azimuths, in [0, 180].
inline double wrapped_distance_deg(double a, double b) {
    double d = std::fabs(wrap_degrees(a) - wrap_degrees(b));
    return d > 180.0 ? 360.0 - d : d;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_to_db(double lin) { return 20.0 * std::log10(lin); }

// Deterministic 64-bit mix (splitmix64). Used to derive per-record RNG seeds
// so dataset generation stays reproducible and order-independent.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace binaura
