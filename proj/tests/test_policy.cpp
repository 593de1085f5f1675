#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "binaura/policy.hpp"

using namespace binaura;

namespace {

TokenStream stream_of(std::vector<std::pair<std::string, double>> spec) {
    TokenStream s;
    for (auto& [tok, t] : spec) {
        s.tokens.push_back(tok);
        s.times.push_back(t);
    }
    s.validate();
    return s;
}

OracleDecoders make_decoders(TokenStream src, TokenStream tgt) {
    OracleDecoders d;
    d.src_ctc = std::move(src);
    d.tgt_ctc = std::move(tgt);
    d.validate();
    return d;
}

}  // namespace

TEST_CASE("policy writes one token per chunk when source drives it") {
    // Hand-simulated: target tokens all available at t=0, one source token
    // recognized per 0.96 s chunk. Each chunk licenses exactly one write.
    const auto decoders = make_decoders(
        stream_of({{"s1", 0.96}, {"s2", 1.92}, {"s3", 2.88}}),
        stream_of({{"t1", 0.0}, {"t2", 0.0}, {"t3", 0.0}}));
    const PolicyTrace trace = run_policy(decoders, 0.96);

    const auto writes = trace.write_times();
    REQUIRE(writes.size() == 3);
    CHECK(writes[0] == Catch::Approx(0.96));
    CHECK(writes[1] == Catch::Approx(1.92));
    CHECK(writes[2] == Catch::Approx(2.88));
    // Interleaved READ/WRITE in the main phase.
    REQUIRE(trace.actions.size() >= 4);
    CHECK_FALSE(trace.actions[0].write);
    CHECK(trace.actions[1].write);
}

TEST_CASE("policy defers everything to the flush when recognition is late") {
    // Source recognized only at the very end: non-simultaneous mode.
    const auto decoders = make_decoders(
        stream_of({{"s1", 3.0}, {"s2", 3.0}}),
        stream_of({{"t1", 0.5}, {"t2", 0.6}, {"t3", 0.7}}));
    const PolicyTrace trace = run_policy(decoders, 0.96);
    const auto writes = trace.write_times();
    REQUIRE(writes.size() == 3);
    for (double t : writes) CHECK(t >= 3.0 - 1e-12);
    // Flush emits one per step.
    CHECK(writes[1] == Catch::Approx(writes[0] + 0.96));
    CHECK(writes[2] == Catch::Approx(writes[1] + 0.96));
}

TEST_CASE("policy never writes while the CTC gate blocks") {
    // Target CTC produces tokens only after the source ends, so no WRITE can
    // fire during the main phase.
    const auto decoders = make_decoders(
        stream_of({{"s1", 0.5}, {"s2", 1.0}, {"s3", 4.0}}),
        stream_of({{"t1", 4.5}, {"t2", 4.6}}));
    const PolicyTrace trace = run_policy(decoders, 0.96);
    for (const auto& a : trace.actions)
        if (a.write) CHECK(a.time_s >= 4.0);
}

TEST_CASE("policy causality: written tokens were available at write time") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    for (int trial = 0; trial < 200; ++trial) {
        TokenStream src, tgt;
        const int ns = 1 + static_cast<int>(rng() % 8);
        const int nt = 1 + static_cast<int>(rng() % 8);
        std::vector<double> st, tt;
        for (int i = 0; i < ns; ++i) st.push_back(u(rng));
        for (int i = 0; i < nt; ++i) tt.push_back(u(rng));
        std::sort(st.begin(), st.end());
        std::sort(tt.begin(), tt.end());
        for (int i = 0; i < ns; ++i) {
            src.tokens.push_back("s" + std::to_string(i));
            src.times.push_back(st[i]);
        }
        for (int i = 0; i < nt; ++i) {
            tgt.tokens.push_back("t" + std::to_string(i));
            tgt.times.push_back(tt[i]);
        }
        const PolicyTrace trace = run_policy(make_decoders(src, tgt), 0.32);
        std::size_t written = 0;
        for (const auto& a : trace.actions) {
            if (!a.write) continue;
            CHECK(tgt.times[written] <= a.time_s + 1e-9);
            ++written;
        }
        CHECK(written == tgt.tokens.size());
    }
}

TEST_CASE("average lagging closed forms") {
    PolicyTrace trace;
    trace.chunk_s = 1.0;

    SECTION("single token at the source end") {
        trace.actions = {{3.0, true, "a"}};
        CHECK(average_lagging(trace, 3.0) == Catch::Approx(3.0));
    }

    SECTION("ideal proportional schedule gives zero") {
        const double T = 3.0;
        trace.actions = {{0.0, true, "a"}, {1.0, true, "b"}, {2.0, true, "c"}};
        CHECK(average_lagging(trace, T) == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("uniform one-second lag") {
        trace.actions = {{1.0, true, "a"}, {2.0, true, "b"}, {3.0, true, "c"}};
        CHECK(average_lagging(trace, 3.0) == Catch::Approx(1.0));
    }

    SECTION("no writes is undefined") {
        trace.actions = {{1.0, false, ""}};
        CHECK_THROWS_AS(average_lagging(trace, 3.0), UndefinedLatency);
    }
}

TEST_CASE("delaying recognition never decreases AL") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0.2, 6.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> st;
        const int ns = 2 + static_cast<int>(rng() % 6);
        for (int i = 0; i < ns; ++i) st.push_back(u(rng));
        std::sort(st.begin(), st.end());
        TokenStream src, tgt;
        for (int i = 0; i < ns; ++i) {
            src.tokens.push_back("s");
            src.times.push_back(st[i]);
        }
        for (int i = 0; i < 5; ++i) {
            tgt.tokens.push_back("t");
            tgt.times.push_back(0.05 * i);
        }
        const double T = st.back();
        const double al0 =
            average_lagging(run_policy(make_decoders(src, tgt), 0.64), T);
        TokenStream late = src;
        const double delta = 0.7;
        for (double& t : late.times) t += delta;
        const double al1 =
            average_lagging(run_policy(make_decoders(late, tgt), 0.64), T);
        INFO("trial " << trial);
        CHECK(al1 >= al0 - 1e-9);
    }
}

TEST_CASE("AL is non-decreasing in chunk size on a fixed stream") {
    // Source recognition times placed away from the inversion windows of the
    // non-nested 0.64/0.96 grids.
    TokenStream src, tgt;
    const std::vector<double> times = {1.10, 3.05, 4.95, 6.85, 8.70};
    for (double t : times) {
        src.tokens.push_back("s");
        src.times.push_back(t);
    }
    for (int i = 0; i < 5; ++i) {
        tgt.tokens.push_back("t");
        tgt.times.push_back(0.01 * i);
    }
    const auto decoders = make_decoders(src, tgt);
    double prev = -1.0;
    for (double chunk : {0.32, 0.64, 0.96, 1.92}) {
        const double al = average_lagging(run_policy(decoders, chunk), src.times.back());
        INFO("chunk " << chunk);
        CHECK(al >= prev - 1e-9);
        prev = al;
    }
}

TEST_CASE("oracle stream JSON round-trip and trace serialization") {
    const auto dir = std::filesystem::temp_directory_path() / "binaura_policy";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "streams.json").string();
    {
        std::ofstream f(path);
        f << R"({"src":[{"tok":"bonjour","t":0.5},{"tok":"monde","t":1.2}],)"
          << R"("tgt_ctc":[{"tok":"hello","t":0.8},{"tok":"world","t":1.3}],)"
          << R"("refs":[["hello","world"]],"source_duration_s":1.5})" << "\n";
    }
    const OracleStreamFile loaded = load_oracle_streams(path);
    CHECK(loaded.decoders.src_ctc.tokens.size() == 2);
    CHECK(loaded.decoders.tgt_ctc.times[1] == 1.3);
    CHECK(loaded.refs.size() == 1);
    CHECK(loaded.source_duration_s == 1.5);

    const PolicyTrace trace = run_policy(loaded.decoders, 0.32);
    const nlohmann::json j = trace_to_json(trace);
    CHECK(j.at("chunk_s") == 0.32);
    CHECK(j.at("actions").size() == trace.actions.size());
}

TEST_CASE("token stream validation") {
    TokenStream bad;
    bad.tokens = {"a", "b"};
    bad.times = {1.0};
    CHECK_THROWS_AS(bad.validate(), InvalidSpec);
    bad.times = {2.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), InvalidSpec);
}
