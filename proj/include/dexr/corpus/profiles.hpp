#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dexr/corpus/embedder.hpp"
#include "dexr/corpus/record.hpp"
#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"

namespace dexr {

enum class profile_kind { user, item };

inline const char* to_string(profile_kind k) { return k == profile_kind::user ? "user" : "item"; }

/// Top-k historical review sentences of a user or item for one target record.
struct persona_profile {
    std::string record;  // target record id
    std::string owner;
    profile_kind kind = profile_kind::user;
    std::vector<token_list> sentences;
    std::vector<double> scores;
    std::vector<std::string> sources;  // record id of each sentence; empty for placeholders

    friend bool operator==(const persona_profile&, const persona_profile&) = default;
};

enum class profile_ranking {
    target_similarity,  // cosine similarity to the target review
    recency             // latest history first; no target needed
};

struct profile_options {
    std::size_t k = 5;
    profile_ranking ranking = profile_ranking::target_similarity;
};

/// Indexes one split so profiles for all of its records can be built
/// without rescanning. An optional fallback pool (the training split when
/// profiling an evaluation split) is consulted only for owners that have no
/// other history in the split itself.
template <class Embedder>
class profile_builder {
public:
    profile_builder(const record_set& split, const Embedder& embedder, const record_set* fallback = nullptr)
        : embedder_(&embedder) {
        index(split, primary_);
        if (fallback) index(*fallback, fallback_);
    }

    std::pair<persona_profile, persona_profile> build(const interaction_record& target,
                                                      const profile_options& opts) const {
        if (opts.k < 1) throw validation_error("build_profiles: k must be >= 1");
        if (!primary_.by_user.count(target.user))
            throw validation_error("build_profiles: user '" + target.user + "' absent from split");
        if (!primary_.by_item.count(target.item))
            throw validation_error("build_profiles: item '" + target.item + "' absent from split");
        std::vector<double> target_vec;
        if (opts.ranking == profile_ranking::target_similarity) target_vec = embedder_->embed(target.review);
        return {select(target, profile_kind::user, target_vec, opts),
                select(target, profile_kind::item, target_vec, opts)};
    }

private:
    struct entry {
        std::size_t order;  // insertion order within its pool
        const interaction_record* record;
        std::vector<double> vec;
    };
    struct pool {
        std::vector<entry> entries;
        std::unordered_map<std::string, std::vector<std::size_t>> by_user, by_item;
    };

    void index(const record_set& records, pool& p) {
        p.entries.reserve(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            p.entries.push_back(entry{i, &records[i], embedder_->embed(records[i].review)});
            p.by_user[records[i].user].push_back(i);
            p.by_item[records[i].item].push_back(i);
        }
    }

    std::vector<const entry*> candidates(const pool& p, const interaction_record& target,
                                         profile_kind kind) const {
        const auto& map = kind == profile_kind::user ? p.by_user : p.by_item;
        const auto& key = kind == profile_kind::user ? target.user : target.item;
        std::vector<const entry*> out;
        if (auto it = map.find(key); it != map.end())
            for (std::size_t i : it->second)
                if (p.entries[i].record->id != target.id) out.push_back(&p.entries[i]);
        return out;
    }

    persona_profile select(const interaction_record& target, profile_kind kind,
                           const std::vector<double>& target_vec, const profile_options& opts) const {
        persona_profile prof;
        prof.record = target.id;
        prof.kind = kind;
        prof.owner = kind == profile_kind::user ? target.user : target.item;

        auto cands = candidates(primary_, target, kind);
        if (cands.empty()) cands = candidates(fallback_, target, kind);
        if (cands.empty()) {
            // No usable history anywhere: a single unk sentence keeps the
            // encoder input well formed.
            prof.sentences.assign(opts.k, token_list{"<unk>"});
            prof.scores.assign(opts.k, 0.0);
            prof.sources.assign(opts.k, std::string{});
            return prof;
        }

        struct scored {
            double score;
            const entry* e;
        };
        std::vector<scored> ranked;
        ranked.reserve(cands.size());
        for (const entry* e : cands) {
            const double s = target_vec.empty() ? 0.0 : cosine_of_unit(target_vec, e->vec);
            ranked.push_back({s, e});
        }
        if (opts.ranking == profile_ranking::target_similarity) {
            // score desc, then review text, then record id: independent of input order
            std::sort(ranked.begin(), ranked.end(), [](const scored& a, const scored& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.e->record->review != b.e->record->review) return a.e->record->review < b.e->record->review;
                return a.e->record->id < b.e->record->id;
            });
        } else {
            std::sort(ranked.begin(), ranked.end(),
                      [](const scored& a, const scored& b) { return a.e->order > b.e->order; });
        }
        for (std::size_t i = 0; i < opts.k; ++i) {
            const scored& s = ranked[std::min(i, ranked.size() - 1)];
            prof.sentences.push_back(s.e->record->review);
            prof.scores.push_back(s.score);
            prof.sources.push_back(s.e->record->id);
        }
        return prof;
    }

    const Embedder* embedder_;
    pool primary_;
    pool fallback_;
};

/// Convenience wrapper building the profile pair of a single target.
template <class Embedder>
std::pair<persona_profile, persona_profile> build_profiles(const record_set& split,
                                                           const interaction_record& target,
                                                           const Embedder& embedder,
                                                           const profile_options& opts = {}) {
    return profile_builder<Embedder>(split, embedder).build(target, opts);
}

/// Profiles of one split keyed by target record id.
struct profile_table {
    std::map<std::string, std::pair<persona_profile, persona_profile>> by_record;

    const std::pair<persona_profile, persona_profile>& at(const std::string& record_id) const {
        auto it = by_record.find(record_id);
        if (it == by_record.end()) throw validation_error("no profiles for record '" + record_id + "'");
        return it->second;
    }
};

template <class Embedder>
profile_table build_profile_table(const record_set& split, const Embedder& embedder,
                                  const profile_options& opts, const record_set* fallback = nullptr) {
    profile_builder<Embedder> builder(split, embedder, fallback);
    profile_table table;
    for (const auto& r : split) table.by_record.emplace(r.id, builder.build(r, opts));
    return table;
}

inline nlohmann::ordered_json to_json(const persona_profile& p) {
    nlohmann::ordered_json j;
    j["record"] = p.record;
    j["owner"] = p.owner;
    j["kind"] = to_string(p.kind);
    auto sentences = nlohmann::ordered_json::array();
    for (const auto& s : p.sentences) sentences.push_back(detokenize(s));
    j["sentences"] = sentences;
    j["scores"] = p.scores;
    j["sources"] = p.sources;
    return j;
}

/// JSONL, user profile line then item profile line per record, in split order.
inline void save_profiles(const profile_table& table, const record_set& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write profiles to " + path);
    for (const auto& r : split) {
        const auto& [u, i] = table.at(r.id);
        out << to_json(u).dump() << '\n' << to_json(i).dump() << '\n';
    }
    if (!out) throw error("failed writing profiles to " + path);
}

inline profile_table load_profiles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot read profiles from " + path);
    profile_table table;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        persona_profile p;
        try {
            auto j = nlohmann::json::parse(text);
            p.record = j.at("record").get<std::string>();
            p.owner = j.at("owner").get<std::string>();
            const auto kind = j.at("kind").get<std::string>();
            if (kind != "user" && kind != "item") throw parse_error("kind must be user or item", line);
            p.kind = kind == "user" ? profile_kind::user : profile_kind::item;
            for (const auto& s : j.at("sentences")) p.sentences.push_back(split_tokens(s.get<std::string>()));
            p.scores = j.at("scores").get<std::vector<double>>();
            if (j.contains("sources")) p.sources = j["sources"].get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("bad profile: ") + e.what(), line);
        }
        if (p.sentences.size() != p.scores.size())
            throw parse_error("sentences and scores differ in length", line);
        auto& slot = table.by_record[p.record];
        (p.kind == profile_kind::user ? slot.first : slot.second) = std::move(p);
    }
    return table;
}

}  // namespace dexr
