#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"

namespace dexr {

using ngram_counts = std::map<std::vector<std::string>, std::size_t>;

inline ngram_counts count_ngrams(const token_list& s, std::size_t n) {
    ngram_counts out;
    if (n == 0 || s.size() < n) return out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[token_list(s.begin() + i, s.begin() + i + n)];
    return out;
}

/// Sum over n-grams of min(count in a, count in b).
inline std::size_t clipped_overlap(const ngram_counts& a, const ngram_counts& b) {
    std::size_t m = 0;
    for (const auto& [g, c] : a) {
        auto it = b.find(g);
        if (it != b.end()) m += std::min(c, it->second);
    }
    return m;
}

/// Corpus-level sufficient statistics for BLEU up to order max_n.
struct bleu_stats {
    std::vector<std::size_t> matches;  // index n-1
    std::vector<std::size_t> totals;
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;

    double precision(std::size_t n) const {
        return totals[n - 1] ? double(matches[n - 1]) / double(totals[n - 1]) : 0.0;
    }
};

inline bleu_stats collect_bleu_stats(std::span<const token_list> candidates, std::span<const token_list> references,
                                     std::size_t max_n) {
    if (candidates.size() != references.size())
        throw validation_error("bleu: " + std::to_string(candidates.size()) + " candidates vs " +
                               std::to_string(references.size()) + " references");
    if (candidates.empty()) throw validation_error("bleu: empty corpus");
    bleu_stats s;
    s.matches.assign(max_n, 0);
    s.totals.assign(max_n, 0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        s.candidate_length += candidates[i].size();
        s.reference_length += references[i].size();
        for (std::size_t n = 1; n <= max_n; ++n) {
            const auto c = count_ngrams(candidates[i], n);
            for (const auto& [g, k] : c) s.totals[n - 1] += k;
            s.matches[n - 1] += clipped_overlap(c, count_ngrams(references[i], n));
        }
    }
    return s;
}

/// Corpus BLEU-N (uniform weights) with brevity penalty, x100. Orders above
/// one use add-one smoothing, (m + 1) / (c + 1).
inline double bleu_from_stats(const bleu_stats& s, std::size_t max_n) {
    if (s.candidate_length == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        double p;
        if (n == 1)
            p = s.precision(1);
        else
            p = (double(s.matches[n - 1]) + 1.0) / (double(s.totals[n - 1]) + 1.0);
        if (p <= 0.0) return 0.0;
        log_sum += std::log(p);
    }
    const double c = double(s.candidate_length), r = double(s.reference_length);
    const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
    return 100.0 * bp * std::exp(log_sum / double(max_n));
}

inline double bleu_n(std::span<const token_list> candidates, std::span<const token_list> references,
                     std::size_t n) {
    if (n < 1) throw validation_error("bleu: order must be >= 1");
    return bleu_from_stats(collect_bleu_stats(candidates, references, n), n);
}

struct rouge_score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// ROUGE-N of one pair, as fractions in [0, 1].
inline rouge_score rouge_pair(const token_list& candidate, const token_list& reference, std::size_t n) {
    const auto c = count_ngrams(candidate, n);
    const auto r = count_ngrams(reference, n);
    std::size_t tc = 0, tr = 0;
    for (const auto& [g, k] : c) tc += k;
    for (const auto& [g, k] : r) tr += k;
    const double m = double(clipped_overlap(c, r));
    rouge_score s;
    s.precision = tc ? m / double(tc) : 0.0;
    s.recall = tr ? m / double(tr) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

/// ROUGE-N P/R/F averaged over pairs, x100.
inline rouge_score rouge_n(std::span<const token_list> candidates, std::span<const token_list> references,
                           std::size_t n) {
    if (candidates.size() != references.size())
        throw validation_error("rouge: " + std::to_string(candidates.size()) + " candidates vs " +
                               std::to_string(references.size()) + " references");
    if (candidates.empty()) throw validation_error("rouge: empty corpus");
    if (n < 1) throw validation_error("rouge: order must be >= 1");
    rouge_score avg;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto s = rouge_pair(candidates[i], references[i], n);
        avg.precision += s.precision;
        avg.recall += s.recall;
        avg.f1 += s.f1;
    }
    const double k = 100.0 / double(candidates.size());
    avg.precision *= k;
    avg.recall *= k;
    avg.f1 *= k;
    return avg;
}

}  // namespace dexr
