#pragma once

#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dexr/corpus/record.hpp"
#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"
#include "dexr/metrics/explain.hpp"
#include "dexr/metrics/rating.hpp"
#include "dexr/metrics/text.hpp"

namespace dexr {

struct metric_report {
    double rmse = 0.0;
    double mae = 0.0;
    double fmr = 0.0;
    double fcr = 0.0;
    double div = 0.0;
    double usr = 0.0;
    double bleu1 = 0.0;
    double bleu4 = 0.0;
    rouge_score rouge1;
    rouge_score rouge2;
    std::size_t pairs = 0;
    std::size_t rated_pairs = 0;
    std::size_t feature_pairs = 0;
    std::size_t missing_feature = 0;
};

inline metric_report evaluate_pairs(std::span<const eval_pair> pairs, std::span<const std::string> lexicon) {
    if (pairs.empty()) throw validation_error("evaluate: no pairs");
    metric_report m;
    m.pairs = pairs.size();
    std::vector<double> pred, truth;
    std::vector<token_list> cand, refs;
    for (const auto& p : pairs) {
        if (p.predicted_rating && p.true_rating) {
            pred.push_back(*p.predicted_rating);
            truth.push_back(*p.true_rating);
        }
        cand.push_back(p.generated);
        refs.push_back(p.reference);
    }
    m.rated_pairs = pred.size();
    if (!pred.empty()) {
        m.rmse = rmse(pred, truth);
        m.mae = mae(pred, truth);
    }
    const auto f = feature_matching(pairs);
    m.fmr = f.value;
    m.feature_pairs = f.counted;
    m.missing_feature = f.excluded;
    m.fcr = fcr(pairs, lexicon);
    m.div = pairs.size() >= 2 ? div(pairs, lexicon) : 0.0;
    m.usr = usr(std::span<const token_list>(cand));
    m.bleu1 = bleu_n(cand, refs, 1);
    m.bleu4 = bleu_n(cand, refs, 4);
    m.rouge1 = rouge_n(cand, refs, 1);
    m.rouge2 = rouge_n(cand, refs, 2);
    return m;
}

inline nlohmann::ordered_json to_json(const metric_report& m) {
    nlohmann::ordered_json j;
    j["rmse"] = m.rmse;
    j["mae"] = m.mae;
    j["fmr"] = m.fmr;
    j["fcr"] = m.fcr;
    j["div"] = m.div;
    j["usr"] = m.usr;
    j["bleu1"] = m.bleu1;
    j["bleu4"] = m.bleu4;
    j["rouge1_p"] = m.rouge1.precision;
    j["rouge1_r"] = m.rouge1.recall;
    j["rouge1_f"] = m.rouge1.f1;
    j["rouge2_p"] = m.rouge2.precision;
    j["rouge2_r"] = m.rouge2.recall;
    j["rouge2_f"] = m.rouge2.f1;
    j["pairs"] = m.pairs;
    j["rated_pairs"] = m.rated_pairs;
    j["feature_pairs"] = m.feature_pairs;
    j["missing_feature"] = m.missing_feature;
    return j;
}

inline std::string csv_header(const metric_report& m) {
    std::string h;
    const auto j = to_json(m);
    for (const auto& [k, v] : j.items()) h += (h.empty() ? "" : ",") + k;
    return h;
}

inline std::string csv_row(const metric_report& m) {
    std::string row;
    const auto j = to_json(m);
    for (const auto& [k, v] : j.items()) row += (row.empty() ? "" : ",") + v.dump();
    return row;
}

struct prediction {
    std::string id;
    double rating = 0.0;
    token_list review;
};

inline nlohmann::ordered_json to_json(const prediction& p) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["rating"] = p.rating;
    j["review"] = detokenize(p.review);
    return j;
}

inline std::vector<prediction> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open predictions '" + path + "'");
    std::vector<prediction> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            prediction p;
            p.id = j.at("id").get<std::string>();
            p.rating = j.at("rating").get<double>();
            p.review = split_tokens(j.at("review").get<std::string>());
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(path + ": " + e.what(), n);
        }
    }
    return out;
}

inline void save_predictions(const std::vector<prediction>& preds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write predictions '" + path + "'");
    for (const auto& p : preds) out << to_json(p).dump() << '\n';
}

/// Joins predictions to reference records by id. Every prediction must have
/// a reference; references without a prediction are ignored.
inline std::vector<eval_pair> join_by_id(const std::vector<prediction>& preds, const record_set& refs) {
    std::unordered_map<std::string, const interaction_record*> by_id;
    for (const auto& r : refs) by_id.emplace(r.id, &r);
    std::vector<eval_pair> out;
    out.reserve(preds.size());
    for (const auto& p : preds) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) throw validation_error("prediction '" + p.id + "' has no reference record");
        const auto& r = *it->second;
        out.push_back(eval_pair{p.review, r.review, p.rating, r.rating, r.feature});
    }
    return out;
}

}  // namespace dexr
