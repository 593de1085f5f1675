// Independent BLEU reference implementation, written directly from the
// original definition (modified n-gram precision with per-reference clipping,
// geometric mean, brevity penalty), structured around explicit per-sentence
// loops and n-gram vectors rather than the library's pooled counters. Shares
// only the epsilon conventions, which are part of the contract under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace refbleu {

using Sentence = std::vector<std::string>;

inline std::vector<Sentence> ngrams_of(const Sentence& s, std::size_t n) {
    std::vector<Sentence> grams;
    if (s.size() < n) return grams;
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        grams.push_back(Sentence(s.begin() + i, s.begin() + i + n));
    return grams;
}

inline std::size_t count_gram(const std::vector<Sentence>& grams, const Sentence& g) {
    std::size_t c = 0;
    for (const auto& x : grams)
        if (x == g) ++c;
    return c;
}

inline double reference_corpus_bleu(const std::vector<Sentence>& hyps,
                                    const std::vector<std::vector<Sentence>>& refs,
                                    std::size_t max_n = 4, double eps = 1e-9) {
    double hyp_len = 0.0, ref_len = 0.0;
    std::vector<double> correct(max_n, 0.0), total(max_n, 0.0);

    for (std::size_t s = 0; s < hyps.size(); ++s) {
        const Sentence& hyp = hyps[s];
        hyp_len += static_cast<double>(hyp.size());

        // Closest reference length; ties toward the shorter.
        std::size_t best = refs[s][0].size();
        for (const auto& r : refs[s]) {
            const auto d = [&](std::size_t len) {
                return len > hyp.size() ? len - hyp.size() : hyp.size() - len;
            };
            if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best))
                best = r.size();
        }
        ref_len += static_cast<double>(best);

        for (std::size_t n = 1; n <= max_n; ++n) {
            const auto hyp_grams = ngrams_of(hyp, n);
            // Deduplicate hypothesis n-grams, then clip each count by the
            // maximum count over references.
            std::vector<Sentence> unique;
            for (const auto& g : hyp_grams)
                if (count_gram(unique, g) == 0) unique.push_back(g);
            for (const auto& g : unique) {
                const std::size_t h = count_gram(hyp_grams, g);
                std::size_t clip = 0;
                for (const auto& r : refs[s])
                    clip = std::max(clip, count_gram(ngrams_of(r, n), g));
                correct[n - 1] += static_cast<double>(std::min(h, clip));
            }
            total[n - 1] += static_cast<double>(hyp_grams.size());
        }
    }

    if (hyp_len == 0.0) return 0.0;
    double log_p = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        double p;
        if (total[n] == 0.0)
            p = eps;
        else
            p = std::max(correct[n], eps) / total[n];
        log_p += std::log(p);
    }
    const double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
    return 100.0 * bp * std::exp(log_p / static_cast<double>(max_n));
}

}  // namespace refbleu
