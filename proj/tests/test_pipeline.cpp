#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "binaura/pipeline.hpp"
#include "binaura/scene.hpp"
#include "support/test_signals.hpp"

using namespace binaura;

namespace {

SceneInstance oracle_scene(double az0, double az1, std::uint64_t seed,
                           const BrirSet& set, std::size_t len = 15360 * 4) {
    SceneSpec spec;
    spec.stems.push_back({testsig::voice(len, seed, 127.0), 1.0});
    spec.stems.push_back({testsig::voice(len, seed + 1, 199.0), 0.9});
    spec.angles = {{az0, 0.0}, {az1, 0.0}};
    return synthesize_scene(spec, set);
}

PipelineConfig base_config(std::size_t delay_chunks = 0) {
    PipelineConfig cfg;
    cfg.schedule.delay_chunks = delay_chunks;
    cfg.method = RenderMethod::GenericHrtfIldComp;
    return cfg;
}

}  // namespace

TEST_CASE("delay translator: identity pass-through and schedule") {
    DelayTranslator ident(0);
    const MonoBuffer block = testsig::voice(15360, 1, 140.0);
    auto out = ident.push(block);
    REQUIRE(out.size() == 1);
    CHECK(rms_error(out[0], block) == 0.0);
    CHECK(ident.flush().empty());

    // D=2 over five blocks: outputs appear at ticks 2..4, flush carries 2.
    DelayTranslator d2(2);
    std::size_t emitted = 0;
    for (int i = 0; i < 5; ++i) {
        auto blocks = d2.push(block);
        if (i < 2) CHECK(blocks.empty());
        emitted += blocks.size();
    }
    CHECK(emitted == 3);
    CHECK(d2.flush().size() == 2);
}

TEST_CASE("delay translator: timewarp compresses content into the block") {
    DelayTranslator warp(0, TranslatorMode::Timewarp, 1.25);
    MonoBuffer block = MonoBuffer::zeros(15360);
    for (auto& v : block.samples) v = 0.5f;
    auto out = warp.push(block);
    REQUIRE(out.size() == 1);
    REQUIRE(out[0].size() == 15360);
    // 960 ms / 1.25 = 768 ms of audio, remainder zero-padded.
    const auto content = static_cast<std::size_t>(15360 / 1.25);
    for (std::size_t i = 0; i < content - 1; ++i)
        CHECK(out[0].samples[i] == Catch::Approx(0.5).margin(1e-6));
    for (std::size_t i = content + 1; i < 15360; ++i)
        CHECK(out[0].samples[i] == 0.0f);

    CHECK_THROWS_AS(DelayTranslator(0, TranslatorMode::Timewarp, 2.0), ConfigError);
}

TEST_CASE("pipeline on silence produces no sources") {
    const PipelineConfig cfg = base_config();
    const GenericHrtfTable table = make_synthetic_hrtf_table("t0", {});
    std::vector<BinauralBuffer> stems;
    auto sep = oracle_separator_factory(&stems, {}, cfg.locsep.grid.half_bin_deg());
    const PipelineResult result = run_pipeline(
        BinauralBuffer::zeros(15360 * 2), cfg, sep, delay_translator_factory(0), &table);
    CHECK(result.sources.empty());
    CHECK(result.blocks_processed == 2);
}

TEST_CASE("pipeline schedule integrity: 24 hops per translation chunk") {
    const BrirSet set = make_synthetic_brir_set("psched", {});
    const SceneInstance scene = oracle_scene(40.0, 220.0, 30, set, 15360 * 3);
    PipelineConfig cfg = base_config();
    const GenericHrtfTable table = make_synthetic_hrtf_table("t1", {});
    auto sep = oracle_separator_factory(&scene.stems, scene.truth_angles_deg,
                                        cfg.locsep.grid.half_bin_deg());
    const PipelineResult result =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(0), &table);
    CHECK(result.hops_per_block == 24);
    CHECK(result.hops_consumed ==
          (scene.mixture.size() + 639) / 640);
    CHECK(result.blocks_processed * 24 >= result.hops_consumed);
}

TEST_CASE("pipeline oracle scene: angles preserved, D shifts the render") {
    const BrirSet set = make_synthetic_brir_set("pe2e", {});
    const std::size_t len = 15360 * 4;
    const SceneInstance scene = oracle_scene(40.0, 220.0, 31, set, len);
    PipelineConfig cfg = base_config(3);
    const GenericHrtfTable table = make_synthetic_hrtf_table("t2", {});
    auto sep = oracle_separator_factory(&scene.stems, scene.truth_angles_deg,
                                        cfg.locsep.grid.half_bin_deg());
    const PipelineResult result =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(3), &table);

    REQUIRE(result.sources.size() == 2);
    for (const auto& src : result.sources) {
        const double err = std::min(wrapped_distance_deg(src.angle_deg, 40.0),
                                    wrapped_distance_deg(src.angle_deg, 220.0));
        CHECK(err <= 5.0);
        // Identity stub with D=3: the render starts 3 blocks (2.88 s) after
        // the stem content.
        REQUIRE(src.render.size() > 3 * 15360);
        const MonoBuffer head = src.render.left.slice(0, 3 * 15360);
        CHECK(head.rms() == 0.0);

        // The delayed render left channel matches the stem's mono downmix.
        const std::size_t active = std::min(src.stem.size(), src.render.size() - 3 * 15360);
        const MonoBuffer delayed = src.render.left.slice(3 * 15360, active);
        const MonoBuffer expect_src = src.stem.left.slice(0, active);
        CHECK(xcorr_peak_value(delayed, expect_src) > 0.98);
    }
}

TEST_CASE("pipeline with duplicate render and D=0 emits identical channels") {
    const BrirSet set = make_synthetic_brir_set("pdup", {});
    const SceneInstance scene = oracle_scene(90.0, 270.0, 32, set, 15360 * 2);
    PipelineConfig cfg = base_config(0);
    cfg.method = RenderMethod::Duplicate;
    auto sep = oracle_separator_factory(&scene.stems, scene.truth_angles_deg,
                                        cfg.locsep.grid.half_bin_deg());
    const PipelineResult result =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(0), nullptr);
    REQUIRE_FALSE(result.sources.empty());
    for (const auto& src : result.sources) {
        REQUIRE(src.render.size() > 0);
        CHECK(rms_error(src.render.left, src.render.right) == 0.0);
    }
}

TEST_CASE("streamed pipeline equals batch processing for the oracle at D=0") {
    const BrirSet set = make_synthetic_brir_set("peq", {});
    const SceneInstance scene = oracle_scene(60.0, 300.0, 33, set, 15360 * 3);
    PipelineConfig cfg = base_config(0);
    const GenericHrtfTable table = make_synthetic_hrtf_table("t3", {});
    auto sep = oracle_separator_factory(&scene.stems, scene.truth_angles_deg,
                                        cfg.locsep.grid.half_bin_deg());

    const PipelineResult streamed =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(0), &table);

    // Batch route: whole-file search+cluster, then per-block cue extraction
    // and reconciled rendering of the left-channel downmix.
    const auto estimates = localize_and_separate(scene.mixture, cfg.locsep, sep);
    REQUIRE(estimates.size() == streamed.sources.size());
    for (const auto& est : estimates) {
        const PipelineSource* match = nullptr;
        for (const auto& src : streamed.sources)
            if (wrapped_distance_deg(src.angle_deg, est.angle_deg) < 1e-9) match = &src;
        REQUIRE(match != nullptr);

        // Stems agree on gated segments.
        const std::size_t seg = 12000;
        for (std::size_t start = 0; start + seg <= est.stem.size(); start += seg) {
            const BinauralBuffer bs = est.stem.slice(start, seg);
            if (!power_gate(bs, cfg.locsep.power_threshold, cfg.locsep.gate_window_s))
                continue;
            const BinauralBuffer ss = match->stem.slice(start, seg);
            CHECK(rms_error(bs.left, ss.left) < 1e-4);
            CHECK(rms_error(bs.right, ss.right) < 1e-4);
        }

        std::vector<SpatialCues> cues;
        std::vector<MonoBuffer> blocks;
        for (std::size_t b = 0; b * 15360 < est.stem.size(); ++b) {
            const BinauralBuffer blk =
                est.stem.slice(b * 15360, std::min<std::size_t>(15360, est.stem.size() - b * 15360));
            blocks.push_back(blk.left);
            CueOptions copts;
            cues.push_back(extract_cues(blk, est.angle_deg, table, copts));
        }
        const BinauralBuffer batch =
            reconcile_delay(cues, blocks, 0, cfg.method, &table);
        const std::size_t n = std::min(batch.size(), match->render.size());
        CHECK(interior_rms_error(batch.left.slice(0, n), match->render.left.slice(0, n), 160) < 1e-4);
        CHECK(interior_rms_error(batch.right.slice(0, n), match->render.right.slice(0, n), 160) < 1e-4);
    }
}

TEST_CASE("pipeline is deterministic across runs") {
    const BrirSet set = make_synthetic_brir_set("pdet", {});
    const SceneInstance scene = oracle_scene(10.0, 130.0, 34, set, 15360 * 2);
    PipelineConfig cfg = base_config(1);
    const GenericHrtfTable table = make_synthetic_hrtf_table("t4", {});
    auto sep = oracle_separator_factory(&scene.stems, scene.truth_angles_deg,
                                        cfg.locsep.grid.half_bin_deg());
    const PipelineResult a =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(1), &table);
    const PipelineResult b =
        run_pipeline(scene.mixture, cfg, sep, delay_translator_factory(1), &table);
    REQUIRE(a.sources.size() == b.sources.size());
    for (std::size_t i = 0; i < a.sources.size(); ++i) {
        CHECK(a.sources[i].angle_deg == b.sources[i].angle_deg);
        CHECK(a.sources[i].render.left.samples == b.sources[i].render.left.samples);
        CHECK(a.sources[i].stem.right.samples == b.sources[i].stem.right.samples);
    }
}

TEST_CASE("profile_rtf: a 4 ms stage on 40 ms chunks reads rtf 0.1") {
    ProfiledStage stage;
    stage.name = "sleeper";
    stage.chunk_ms = 40.0;
    stage.run = [](std::size_t) {
        std::this_thread::sleep_for(std::chrono::milliseconds(4));
    };
    const RtfReport report = profile_rtf({stage}, 3, 25);
    REQUIRE(report.stages.size() == 1);
    CHECK(report.stages[0].rtf == Catch::Approx(0.10).margin(0.03));
    CHECK(report.cumulative_rtf == Catch::Approx(report.stages[0].rtf));
}

TEST_CASE("profile_rtf: warmup chunks are excluded") {
    // A stage 10x slower on its first calls reports the steady-state rtf.
    auto counter = std::make_shared<std::size_t>(0);
    ProfiledStage stage;
    stage.name = "coldstart";
    stage.chunk_ms = 40.0;
    stage.run = [counter](std::size_t) {
        const auto ms = (*counter)++ < 10 ? 20 : 2;
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    };
    const RtfReport report = profile_rtf({stage}, 10, 30);
    CHECK(report.stages[0].rtf == Catch::Approx(0.05).margin(0.02));
}

TEST_CASE("profile_rtf cumulative sums stage rtfs") {
    auto quick = [](std::size_t) {};
    const RtfReport report = profile_rtf(
        {{"a", 40.0, quick}, {"b", 960.0, quick}}, 2, 10);
    CHECK(report.cumulative_rtf ==
          Catch::Approx(report.stages[0].rtf + report.stages[1].rtf));
    const auto j = rtf_report_to_json(report);
    CHECK(j.at("stages").size() == 2);
}

TEST_CASE("schedule validation") {
    ChunkSchedule bad;
    bad.trans_chunk = 1000;  // not a multiple of 640
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    ChunkSchedule good;
    CHECK(good.hops_per_chunk() == 24);
}
