// policy.hpp -- token-level simulation of the simultaneous READ/WRITE
// translation policy, plus the latency (average lagging) and quality (BLEU)
// metrics over token streams.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "binaura/common.hpp"

namespace binaura {

// A token sequence with the times (seconds) at which each token becomes
// available from its decoder.
struct TokenStream {
    std::vector<std::string> tokens;
    std::vector<double> times;

    void validate() const {
        if (tokens.size() != times.size())
            throw InvalidSpec("TokenStream: tokens/times length mismatch");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] < times[i - 1])
                throw InvalidSpec("TokenStream: emission times must be non-decreasing");
    }

    std::size_t count_at(double t) const {
        std::size_t n = 0;
        while (n < times.size() && times[n] <= t + 1e-12) ++n;
        return n;
    }

    double end_time() const { return times.empty() ? 0.0 : times.back(); }
};

// Oracle stand-ins for the two CTC decoders that drive the policy: source
// token recognition times and target token availability times.
struct OracleDecoders {
    TokenStream src_ctc;
    TokenStream tgt_ctc;

    void validate() const {
        src_ctc.validate();
        tgt_ctc.validate();
        if (src_ctc.tokens.empty() || tgt_ctc.tokens.empty())
            throw InvalidSpec("OracleDecoders: streams must be non-empty");
    }
};

struct PolicyAction {
    double time_s = 0.0;
    bool write = false;
    std::string token;  // set for WRITE actions
};

struct PolicyTrace {
    std::vector<PolicyAction> actions;
    double chunk_s = 0.96;

    std::size_t write_count() const {
        std::size_t n = 0;
        for (const auto& a : actions) n += a.write ? 1 : 0;
        return n;
    }

    std::vector<double> write_times() const {
        std::vector<double> t;
        for (const auto& a : actions)
            if (a.write) t.push_back(a.time_s);
        return t;
    }
};

// Simulates the READ/WRITE policy in chunk_s steps. Each step READs one more
// source chunk; every newly recognized source token licenses one WRITE, which
// fires only while the target CTC stream has produced more tokens than have
// been written so far. Once the source stream ends, the remaining target
// tokens are flushed one per step.
inline PolicyTrace run_policy(const OracleDecoders& decoders, double chunk_s = 0.96) {
    decoders.validate();
    if (chunk_s <= 0.0) throw ConfigError("run_policy: chunk must be positive");

    PolicyTrace trace;
    trace.chunk_s = chunk_s;
    const std::size_t n_target = decoders.tgt_ctc.tokens.size();
    const double src_end = decoders.src_ctc.end_time();

    std::size_t n_written = 0;
    std::size_t last_src = 0;
    std::size_t credits = 0;
    double t = 0.0;

    while (t + chunk_s < src_end - 1e-12) {
        t += chunk_s;
        trace.actions.push_back({t, false, ""});
        const std::size_t n_src = decoders.src_ctc.count_at(t);
        credits += n_src - last_src;
        last_src = n_src;
        while (credits > 0 && n_written < n_target &&
               decoders.tgt_ctc.count_at(t) > n_written) {
            trace.actions.push_back({t, true, decoders.tgt_ctc.tokens[n_written]});
            ++n_written;
            --credits;
        }
    }

    // Flush phase: one write per step from the source end onward.
    while (n_written < n_target) {
        t += chunk_s;
        if (decoders.tgt_ctc.times[n_written] <= t + 1e-12) {
            trace.actions.push_back({t, true, decoders.tgt_ctc.tokens[n_written]});
            ++n_written;
        } else {
            trace.actions.push_back({t, false, ""});
        }
    }
    return trace;
}

// Average lagging over the written tokens: mean of t_write(i) minus the
// ideal proportional schedule (i-1) * T / |target|, cut off at the first
// write that lands at or after the source end.
inline double average_lagging(const PolicyTrace& trace, double source_duration_s) {
    const std::vector<double> writes = trace.write_times();
    if (writes.empty())
        throw UndefinedLatency("average_lagging: trace has no WRITE actions");
    const auto n = writes.size();
    std::size_t tau = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (writes[i] >= source_duration_s - 1e-12) {
            tau = i + 1;
            break;
        }
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < tau; ++i)
        acc += writes[i] - static_cast<double>(i) * source_duration_s /
                               static_cast<double>(n);
    return acc / static_cast<double>(tau);
}

// --- BLEU ------------------------------------------------------------------

// Whitespace tokenization with case folding; the hook point for alternative
// tokenizers.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace detail {

inline std::map<std::string, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            key += tokens[i + j];
            key.push_back('\x1f');
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace detail

inline constexpr double kBleuEpsilon = 1e-9;

// Corpus BLEU-4 with brevity penalty. Zero n-gram matches (including orders
// the hypothesis is too short to produce) contribute an epsilon precision.
inline double corpus_bleu(const std::vector<std::vector<std::string>>& hypotheses,
                          const std::vector<std::vector<std::vector<std::string>>>& references,
                          std::size_t max_n = 4) {
    if (hypotheses.size() != references.size())
        throw InvalidSpec("corpus_bleu: hypothesis/reference count mismatch");
    for (const auto& refs : references)
        if (refs.empty()) throw InvalidSpec("corpus_bleu: sentence without references");

    std::vector<std::size_t> correct(max_n, 0), total(max_n, 0);
    std::size_t hyp_len = 0, ref_len = 0;

    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto& hyp = hypotheses[s];
        const auto& refs = references[s];
        hyp_len += hyp.size();

        // Effective reference length: the closest to the hypothesis length,
        // ties resolved toward the shorter reference.
        std::size_t best_ref = refs[0].size();
        for (const auto& r : refs) {
            const auto diff = [&](std::size_t len) {
                return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
            };
            if (diff(r.size()) < diff(best_ref) ||
                (diff(r.size()) == diff(best_ref) && r.size() < best_ref))
                best_ref = r.size();
        }
        ref_len += best_ref;

        for (std::size_t n = 1; n <= max_n; ++n) {
            const auto hyp_counts = detail::ngram_counts(hyp, n);
            std::map<std::string, std::size_t> clip;
            for (const auto& r : refs)
                for (const auto& [key, cnt] : detail::ngram_counts(r, n))
                    clip[key] = std::max(clip[key], cnt);
            for (const auto& [key, cnt] : hyp_counts) {
                total[n - 1] += cnt;
                const auto it = clip.find(key);
                if (it != clip.end()) correct[n - 1] += std::min(cnt, it->second);
            }
        }
    }

    if (hyp_len == 0) return 0.0;

    double log_precision = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        double p;
        if (total[n] == 0)
            p = kBleuEpsilon;
        else
            p = std::max(static_cast<double>(correct[n]), kBleuEpsilon) /
                static_cast<double>(total[n]);
        log_precision += std::log(p);
    }

    double bp = 1.0;
    if (hyp_len < ref_len)
        bp = std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_precision / static_cast<double>(max_n));
}

// Sentence-level convenience wrapper matching the TokenStream types.
inline double bleu(const TokenStream& hypothesis,
                   const std::vector<TokenStream>& references, std::size_t max_n = 4) {
    if (references.empty()) throw InvalidSpec("bleu: need at least one reference");
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back(r.tokens);
    return corpus_bleu({hypothesis.tokens}, {refs}, max_n);
}

// --- Oracle stream JSON ------------------------------------------------------
//
// {"src": [{"tok": ..., "t": ...}], "tgt_ctc": [{"tok": ..., "t": ...}],
//  "refs": [["tok", ...], ...]}

struct OracleStreamFile {
    OracleDecoders decoders;
    std::vector<std::vector<std::string>> refs;
    double source_duration_s = 0.0;  // defaults to the last src emission time
};

inline OracleStreamFile load_oracle_streams(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingAsset("load_oracle_streams: cannot open " + path);
    nlohmann::json j;
    f >> j;
    OracleStreamFile out;
    auto parse_stream = [](const nlohmann::json& arr) {
        TokenStream s;
        for (const auto& e : arr) {
            s.tokens.push_back(e.at("tok").get<std::string>());
            s.times.push_back(e.at("t").get<double>());
        }
        s.validate();
        return s;
    };
    out.decoders.src_ctc = parse_stream(j.at("src"));
    out.decoders.tgt_ctc = parse_stream(j.at("tgt_ctc"));
    if (j.contains("refs"))
        for (const auto& r : j.at("refs"))
            out.refs.push_back(r.get<std::vector<std::string>>());
    out.source_duration_s =
        j.value("source_duration_s", out.decoders.src_ctc.end_time());
    return out;
}

inline nlohmann::json trace_to_json(const PolicyTrace& trace) {
    nlohmann::json j;
    j["chunk_s"] = trace.chunk_s;
    j["actions"] = nlohmann::json::array();
    for (const auto& a : trace.actions) {
        nlohmann::json e;
        e["t"] = a.time_s;
        e["a"] = a.write ? "W" : "R";
        if (a.write) e["tok"] = a.token;
        j["actions"].push_back(e);
    }
    return j;
}

}  // namespace binaura
