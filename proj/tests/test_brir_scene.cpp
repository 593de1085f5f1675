#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "binaura/brir.hpp"
#include "binaura/scene.hpp"
#include "support/test_signals.hpp"

using namespace binaura;

namespace {

BrirEntry impulse_pair_entry(double az = 0.0) {
    MonoBuffer d = MonoBuffer::zeros(1);
    d.samples[0] = 1.0f;
    return BrirEntry{az, 0.0, BinauralBuffer(d, d)};
}

}  // namespace

TEST_CASE("spatialize with an impulse-pair BRIR is identity") {
    const MonoBuffer speech = testsig::burst_noise(4000, 1);
    const BinauralBuffer out = spatialize(speech, impulse_pair_entry(), 1.0);
    CHECK(rms_error(out.left, speech) < 1e-9);
    CHECK(rms_error(out.right, speech) < 1e-9);
}

TEST_CASE("spatialize reproduces a constructed 8-sample delay") {
    MonoBuffer hl = MonoBuffer::zeros(16);
    hl.samples[0] = 1.0f;
    MonoBuffer hr = MonoBuffer::zeros(16);
    hr.samples[8] = 1.0f;
    const BrirEntry entry{0.0, 0.0, BinauralBuffer(hl, hr)};
    const MonoBuffer speech = testsig::burst_noise(8000, 2);
    const BinauralBuffer out = spatialize(speech, entry, 1.0);
    CHECK(xcorr_lag(out.left, out.right) == Catch::Approx(500e-6));
}

TEST_CASE("spatialize gain is linear") {
    const MonoBuffer speech = testsig::burst_noise(3000, 3);
    const BrirEntry entry = impulse_pair_entry();
    BinauralBuffer full = spatialize(speech, entry, 1.0);
    const BinauralBuffer half = spatialize(speech, entry, 0.5);
    full.scale(0.5);
    CHECK(rms_error(full.left, half.left) < 1e-9);
    CHECK(rms_error(full.right, half.right) < 1e-9);
}

TEST_CASE("synthetic BRIR sets realize the physical TDoA and ILD") {
    const BrirSet set = make_synthetic_brir_set("probe", {});
    REQUIRE(set.entries.size() == 36);
    const MonoBuffer speech = testsig::band_limited_noise(16000, 4);
    for (double az : {30.0, 90.0, 200.0, 330.0}) {
        const BinauralBuffer out = spatialize(speech, set.nearest(az), 1.0);
        const double expected_itd = tdoa_seconds(az);
        const double measured = xcorr_lag(out.left, out.right);
        INFO("azimuth " << az);
        CHECK(std::fabs(measured - expected_itd) <= 0.5 / kSampleRate + 1e-12);
        const double expected_ild_db = -6.0 * std::sin(az * kPi / 180.0);
        const double got_db =
            linear_to_db((out.right.l1_norm() + 1e-8) / (out.left.l1_norm() + 1e-8));
        CHECK(got_db == Catch::Approx(expected_ild_db).margin(0.25));
    }
}

TEST_CASE("BrirSet validation rejects bad sets") {
    BrirSet set;
    set.name = "bad";
    set.entries.push_back(impulse_pair_entry(0.0));
    CHECK_THROWS_AS(set.validate(), InvalidSpec);  // one azimuth only
    set.entries.push_back(impulse_pair_entry(0.0));
    CHECK_THROWS_AS(set.validate(), InvalidSpec);  // duplicate key
}

TEST_CASE("scene mixture equals the sum of its stems") {
    const BrirSet set = make_synthetic_brir_set("mix", {});
    SceneSpec spec;
    spec.stems.push_back({testsig::burst_noise(8000, 5), 1.0});
    spec.stems.push_back({testsig::burst_noise(6000, 6), 1.0});
    spec.angles = {{40.0, 0.0}, {180.0, 0.0}};
    const SceneInstance scene = synthesize_scene(spec, set);
    REQUIRE(scene.stems.size() == 2);
    BinauralBuffer sum = scene.stems[0];
    sum.add(scene.stems[1]);
    CHECK(rms_error(sum.left, scene.mixture.left) < 1e-6);
    CHECK(rms_error(sum.right, scene.mixture.right) < 1e-6);
    CHECK(scene.truth_angles_deg == std::vector<double>{40.0, 180.0});
}

TEST_CASE("a 15 dB stem power difference is recorded") {
    const BrirSet set = make_synthetic_brir_set("pw", {});
    // Gains span 14 dB; the extra decibel comes from the stems themselves.
    const double residual_db = 15.0 - 20.0 * std::log10(1.0 / 0.2);
    SceneSpec spec;
    spec.stems.push_back({testsig::band_limited_noise(8000, 7, 7000.0, 0.25), 1.0});
    spec.stems.push_back(
        {testsig::band_limited_noise(8000, 7, 7000.0, 0.25 * std::pow(10, -residual_db / 20.0)),
         0.2});
    spec.angles = {{0.0, 0.0}, {180.0, 0.0}};
    const SceneInstance scene = synthesize_scene(spec, set);
    const double diff = scene.stem_power_db(0) - scene.stem_power_db(1);
    CHECK(diff == Catch::Approx(15.0).margin(0.1));
}

TEST_CASE("noise flag adds exactly the noise buffer") {
    const BrirSet set = make_synthetic_brir_set("nz", {});
    SceneSpec spec;
    spec.stems.push_back({testsig::burst_noise(5000, 8), 0.8});
    spec.stems.push_back({testsig::burst_noise(5000, 9), 0.6});
    spec.angles = {{10.0, 0.0}, {250.0, 0.0}};
    spec.noise_present = true;
    spec.noise = BinauralBuffer(testsig::white_noise(6000, 10, 0.05),
                                testsig::white_noise(6000, 11, 0.05));
    const SceneInstance scene = synthesize_scene(spec, set);
    BinauralBuffer residue = scene.mixture;
    residue.add(scene.stems[0], -1.0);
    residue.add(scene.stems[1], -1.0);
    BinauralBuffer noise = *spec.noise;
    noise.pad_to(residue.size());
    CHECK(rms_error(residue.left, noise.left) < 1e-6);
    CHECK(rms_error(residue.right, noise.right) < 1e-6);
}

TEST_CASE("scene spec validation") {
    const BrirSet set = make_synthetic_brir_set("va", {});
    SceneSpec spec;
    spec.stems.push_back({testsig::burst_noise(1000, 12), 1.0});
    spec.angles = {{0.0, 0.0}};
    CHECK_THROWS_AS(synthesize_scene(spec, set), InvalidSpec);  // one stem

    spec.stems.push_back({testsig::burst_noise(1000, 13), 1.0});
    spec.angles.push_back({0.0, 0.0});
    CHECK_THROWS_AS(synthesize_scene(spec, set), InvalidSpec);  // duplicate angle

    spec.angles[1].azimuth_deg = 90.0;
    spec.stems[1].gain = 0.05;
    CHECK_THROWS_AS(synthesize_scene(spec, set), InvalidSpec);  // gain below 0.2

    spec.stems[1].gain = 1.0;
    spec.stems[1].audio = MonoBuffer{};
    CHECK_THROWS_AS(synthesize_scene(spec, set), MissingAsset);  // empty audio
}

TEST_CASE("BRIR manifests round-trip through WAV assets") {
    const BrirSet set = make_synthetic_brir_set("disk", {.n_azimuths = 8});
    const auto dir = std::filesystem::temp_directory_path() / "binaura_brir";
    const std::string manifest = (dir / "set.json").string();
    save_brir_manifest(set, dir.string(), manifest);
    const BrirSet loaded = load_brir_manifest(manifest);
    REQUIRE(loaded.entries.size() == set.entries.size());
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        CHECK(loaded.entries[i].azimuth_deg == set.entries[i].azimuth_deg);
        CHECK(rms_error(loaded.entries[i].ir.left, set.entries[i].ir.left) == 0.0);
    }
}

TEST_CASE("moving scene with zero velocity equals static spatialization") {
    const BrirSet set = make_synthetic_brir_set("motion0", {});
    const MonoBuffer speech = testsig::burst_noise(16000, 14);
    MotionTrajectory traj;
    traj.start_azimuth_deg = 50.0;
    traj.angular_velocity_rad_s = 0.0;
    const SceneInstance moving = synthesize_moving_scene(speech, traj, set);
    const BinauralBuffer fixed = spatialize(speech, set.nearest(50.0), 1.0);
    CHECK(rms_error(moving.mixture.left, fixed.left) < 1e-3);
    CHECK(rms_error(moving.mixture.right, fixed.right) < 1e-3);
}

TEST_CASE("moving scene kinematics and monotone truth angles") {
    MotionTrajectory traj;
    traj.start_azimuth_deg = 10.0;
    traj.angular_velocity_rad_s = kPi / 4.0;
    CHECK(traj.azimuth_at(2.0) == Catch::Approx(100.0));

    const BrirSet set = make_synthetic_brir_set("motion1", {});
    const MonoBuffer speech = testsig::burst_noise(32000, 15);
    const SceneInstance scene = synthesize_moving_scene(speech, traj, set);
    REQUIRE(scene.truth_angles_deg.size() == 40);
    for (std::size_t i = 1; i < scene.truth_angles_deg.size(); ++i)
        CHECK(scene.truth_angles_deg[i] > scene.truth_angles_deg[i - 1]);
}

TEST_CASE("moving scene rejects out-of-range velocity and coarse grids") {
    MotionTrajectory fast;
    fast.angular_velocity_rad_s = 2.0;
    CHECK_THROWS_AS(fast.validate(), InvalidTrajectory);

    const BrirSet coarse = make_synthetic_brir_set("coarse", {.n_azimuths = 12});
    MotionTrajectory ok;
    ok.angular_velocity_rad_s = 0.5;
    CHECK_THROWS_AS(
        synthesize_moving_scene(testsig::burst_noise(8000, 16), ok, coarse),
        InvalidSpec);
}
