#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"

namespace dexr {

struct eval_pair {
    token_list generated;
    token_list reference;
    std::optional<double> predicted_rating;
    std::optional<double> true_rating;
    std::optional<std::string> feature;
};

inline bool contains_token(const token_list& s, const std::string& tok) {
    return std::find(s.begin(), s.end(), tok) != s.end();
}

struct fmr_result {
    double value = 0.0;
    std::size_t counted = 0;
    std::size_t excluded = 0;  // pairs without a feature
};

inline fmr_result feature_matching(std::span<const eval_pair> pairs) {
    fmr_result r;
    std::size_t hits = 0;
    for (const auto& p : pairs) {
        if (!p.feature) {
            ++r.excluded;
            continue;
        }
        ++r.counted;
        if (contains_token(p.generated, *p.feature)) ++hits;
    }
    r.value = r.counted ? double(hits) / double(r.counted) : 0.0;
    return r;
}

inline double fmr(std::span<const eval_pair> pairs) { return feature_matching(pairs).value; }

/// Lexicon entries present in `s`, as a sorted set.
inline std::set<std::string> lexicon_features(const token_list& s, const std::set<std::string>& lexicon) {
    std::set<std::string> out;
    for (const auto& w : s)
        if (lexicon.count(w)) out.insert(w);
    return out;
}

inline std::set<std::string> lexicon_set(std::span<const std::string> lexicon) {
    return {lexicon.begin(), lexicon.end()};
}

inline double fcr(std::span<const eval_pair> pairs, std::span<const std::string> lexicon) {
    const auto lex = lexicon_set(lexicon);
    if (lex.empty()) throw validation_error("fcr: empty feature lexicon");
    std::set<std::string> seen;
    for (const auto& p : pairs)
        for (const auto& f : lexicon_features(p.generated, lex)) seen.insert(f);
    return double(seen.size()) / double(lex.size());
}

/// Mean |F_a ∩ F_b| over all unordered pairs of generated sentences. Counted
/// per feature: a feature present in n_f sentences lies in C(n_f, 2) pair
/// intersections.
inline double div(std::span<const eval_pair> pairs, std::span<const std::string> lexicon) {
    if (pairs.size() < 2) throw validation_error("div: need at least 2 pairs");
    const auto lex = lexicon_set(lexicon);
    std::map<std::string, std::size_t> present;
    for (const auto& p : pairs)
        for (const auto& f : lexicon_features(p.generated, lex)) ++present[f];
    double shared = 0.0;
    for (const auto& [f, n] : present) shared += double(n) * double(n - 1) / 2.0;
    const double n = double(pairs.size());
    return shared / (n * (n - 1) / 2.0);
}

inline double usr(std::span<const token_list> sentences) {
    if (sentences.empty()) throw validation_error("usr: no sentences");
    const std::set<token_list> unique(sentences.begin(), sentences.end());
    return double(unique.size()) / double(sentences.size());
}

inline double usr(std::span<const eval_pair> pairs) {
    std::vector<token_list> g;
    g.reserve(pairs.size());
    for (const auto& p : pairs) g.push_back(p.generated);
    return usr(std::span<const token_list>(g));
}

}  // namespace dexr
