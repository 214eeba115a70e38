#pragma once

// Brute-force n-gram oracle for the text metrics: plain vectors and linear
// scans, no maps, sharing no code with the library's counters.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dexr/metrics/explain.hpp"
#include "dexr/metrics/text.hpp"

namespace dexr::testing {

inline std::vector<token_list> grams(const token_list& s, std::size_t n) {
    std::vector<token_list> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) out.emplace_back(s.begin() + i, s.begin() + i + n);
    return out;
}

inline std::size_t occurrences(const std::vector<token_list>& all, const token_list& g) {
    return static_cast<std::size_t>(std::count(all.begin(), all.end(), g));
}

inline std::size_t brute_overlap(const token_list& cand, const token_list& ref, std::size_t n) {
    const auto c = grams(cand, n), r = grams(ref, n);
    std::vector<token_list> seen;
    std::size_t m = 0;
    for (const auto& g : c) {
        if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
        seen.push_back(g);
        m += std::min(occurrences(c, g), occurrences(r, g));
    }
    return m;
}

inline double brute_bleu(const std::vector<token_list>& cands, const std::vector<token_list>& refs, std::size_t N) {
    double c_len = 0, r_len = 0, log_p = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        c_len += double(cands[i].size());
        r_len += double(refs[i].size());
    }
    for (std::size_t n = 1; n <= N; ++n) {
        double match = 0, total = 0;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            match += double(brute_overlap(cands[i], refs[i], n));
            total += double(grams(cands[i], n).size());
        }
        const double p = n == 1 ? (total > 0 ? match / total : 0.0) : (match + 1.0) / (total + 1.0);
        if (p == 0.0) return 0.0;
        log_p += std::log(p);
    }
    if (c_len == 0) return 0.0;
    const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
    return 100.0 * bp * std::exp(log_p / double(N));
}

inline rouge_score brute_rouge(const std::vector<token_list>& cands, const std::vector<token_list>& refs, std::size_t n) {
    rouge_score s;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const double m = double(brute_overlap(cands[i], refs[i], n));
        const double tc = double(grams(cands[i], n).size()), tr = double(grams(refs[i], n).size());
        const double p = tc > 0 ? m / tc : 0.0, r = tr > 0 ? m / tr : 0.0;
        s.precision += p;
        s.recall += r;
        s.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    const double k = 100.0 / double(cands.size());
    return {s.precision * k, s.recall * k, s.f1 * k};
}

inline double brute_div(const std::vector<eval_pair>& pairs, const std::vector<std::string>& lexicon) {
    auto feats = [&](const token_list& s) {
        std::vector<std::string> f;
        for (const auto& w : lexicon)
            if (std::find(s.begin(), s.end(), w) != s.end()) f.push_back(w);
        return f;
    };
    double total = 0, count = 0;
    for (std::size_t a = 0; a < pairs.size(); ++a)
        for (std::size_t b = a + 1; b < pairs.size(); ++b) {
            const auto fa = feats(pairs[a].generated), fb = feats(pairs[b].generated);
            for (const auto& f : fa)
                if (std::find(fb.begin(), fb.end(), f) != fb.end()) total += 1;
            count += 1;
        }
    return total / count;
}

inline std::vector<token_list> random_corpus(std::mt19937_64& rng, std::size_t n, std::size_t max_len) {
    static const token_list words{"a", "b", "c", "d", "e"};
    std::vector<token_list> out(n);
    for (auto& s : out) {
        const std::size_t len = 1 + rng() % max_len;
        for (std::size_t i = 0; i < len; ++i) s.push_back(words[rng() % words.size()]);
    }
    return out;
}

}  // namespace dexr::testing
