#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexr/corpus/text.hpp"
#include "dexr/corpus/vocabulary.hpp"
#include "dexr/error.hpp"

namespace dexr {

/// One (user, item, rating, review, keywords) observation.
struct interaction_record {
    std::string id;
    std::string user;
    std::string item;
    double rating = 0.0;
    token_list review;
    std::optional<std::string> feature;
    std::optional<std::string> opinion;

    friend bool operator==(const interaction_record&, const interaction_record&) = default;
};

using record_set = std::vector<interaction_record>;

inline void validate(const interaction_record& r) {
    if (!(r.rating >= 1.0 && r.rating <= 5.0))
        throw validation_error("record '" + r.id + "': rating " + std::to_string(r.rating) +
                               " outside [1, 5]");
    if (r.review.empty()) throw validation_error("record '" + r.id + "': empty review");
    if (r.user.empty() || r.item.empty())
        throw validation_error("record '" + r.id + "': empty user or item id");
}

/// Review sentences of every record, for vocabulary building.
inline std::vector<token_list> review_sentences(const record_set& records) {
    std::vector<token_list> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.review);
    return out;
}

/// Vocabulary over review tokens; keyword tokens are appended if the count
/// threshold dropped them so every keyword stays encodable.
inline vocabulary build_vocab(const record_set& records, std::size_t min_count) {
    auto v = build_vocab_from_sentences(review_sentences(records), min_count);
    for (const auto& r : records) {
        if (r.feature) v.add(*r.feature);
        if (r.opinion) v.add(*r.opinion);
    }
    return v;
}

inline nlohmann::ordered_json to_json(const interaction_record& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["user"] = r.user;
    j["item"] = r.item;
    j["rating"] = r.rating;
    j["review"] = detokenize(r.review);
    j["feature"] = r.feature ? nlohmann::ordered_json(*r.feature) : nlohmann::ordered_json(nullptr);
    j["opinion"] = r.opinion ? nlohmann::ordered_json(*r.opinion) : nlohmann::ordered_json(nullptr);
    return j;
}

namespace detail {

inline std::optional<std::string> optional_token(const nlohmann::json& j, const char* key, std::size_t line) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw parse_error(std::string("field '") + key + "' must be a string or null", line);
    auto toks = tokenize(j[key].get<std::string>());
    if (toks.size() != 1)
        throw parse_error(std::string("field '") + key + "' must be a single token", line);
    return toks.front();
}

}  // namespace detail

/// Parses one JSONL line. `line` (1-based) is used for error messages and as
/// the default id when the "id" field is absent.
inline interaction_record record_from_json(const std::string& text, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(std::string("malformed JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw parse_error("record must be a JSON object", line);
    for (const char* key : {"user", "item", "rating", "review"})
        if (!j.contains(key)) throw parse_error(std::string("missing field '") + key + "'", line);
    interaction_record r;
    try {
        r.id = j.contains("id") ? j["id"].get<std::string>() : std::to_string(line - 1);
        r.user = j["user"].get<std::string>();
        r.item = j["item"].get<std::string>();
        r.rating = j["rating"].get<double>();
        r.review = tokenize(j["review"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad field type: ") + e.what(), line);
    }
    r.feature = detail::optional_token(j, "feature", line);
    r.opinion = detail::optional_token(j, "opinion", line);
    try {
        validate(r);
    } catch (const validation_error& e) {
        throw validation_error("line " + std::to_string(line) + ": " + e.what());
    }
    return r;
}

inline record_set load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot read records from " + path);
    record_set out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(record_from_json(text, line));
    }
    return out;
}

inline void save_records(const record_set& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write records to " + path);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw error("failed writing records to " + path);
}

}  // namespace dexr
