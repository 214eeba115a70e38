#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dexr/corpus/profiles.hpp"
#include "dexr/corpus/record.hpp"
#include "dexr/corpus/vocabulary.hpp"
#include "dexr/error.hpp"
#include "dexr/model/config.hpp"

namespace dexr {

/// Dense index over opaque user or item ids.
class id_index {
public:
    std::size_t add(const std::string& name) {
        if (auto it = index_.find(name); it != index_.end()) return it->second;
        index_.emplace(name, names_.size());
        names_.push_back(name);
        return names_.size() - 1;
    }

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t at(const std::string& name, const char* what) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw validation_error(std::string("unknown ") + what + " id '" + name + "'");
        return it->second;
    }

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    friend bool operator==(const id_index& a, const id_index& b) { return a.names_ == b.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// A record lowered to model ids.
struct model_example {
    std::string id;
    std::size_t user = 0;
    std::size_t item = 0;
    std::vector<int> keywords;
    std::vector<int> review;   // no eos; the layout appends it
    std::vector<int> persona;  // encoder tokens [P_u, P_i]
    double rating = 0.0;
};

inline std::vector<int> keyword_ids(const interaction_record& r, keyword_mode mode, const vocabulary& vocab) {
    std::vector<int> out;
    if (mode == keyword_mode::none) return out;
    if (!r.feature) throw validation_error("record '" + r.id + "': keyword mode needs a feature");
    out.push_back(vocab.encode(*r.feature));
    if (mode == keyword_mode::feature_opinion) {
        if (!r.opinion) throw validation_error("record '" + r.id + "': keyword mode FO needs an opinion");
        out.push_back(vocab.encode(*r.opinion));
    }
    return out;
}

/// User sentences fill the first half of the encoder budget, item sentences
/// the rest; each side is truncated, never the other's share.
inline std::vector<int> persona_tokens(const persona_profile& user, const persona_profile& item,
                                       const vocabulary& vocab, std::size_t max_len) {
    const std::size_t user_budget = max_len / 2;
    std::vector<int> out;
    for (const auto& s : user.sentences)
        for (const auto& t : s)
            if (out.size() < user_budget) out.push_back(vocab.encode(t));
    for (const auto& s : item.sentences)
        for (const auto& t : s)
            if (out.size() < max_len) out.push_back(vocab.encode(t));
    if (out.empty()) out.push_back(vocabulary::unk_id);
    return out;
}

/// Lowers records to model ids. Reviews longer than max_review_len - 1 are
/// truncated so review + eos fits the word span.
inline model_example make_example(const interaction_record& r, const profile_table& profiles,
                                  const vocabulary& vocab, const id_index& users, const id_index& items,
                                  keyword_mode mode, const model_config& cfg) {
    model_example ex;
    ex.id = r.id;
    ex.user = users.at(r.user, "user");
    ex.item = items.at(r.item, "item");
    ex.keywords = keyword_ids(r, mode, vocab);
    ex.review = vocab.encode(r.review);
    if (ex.review.size() + 1 > cfg.max_review_len) ex.review.resize(cfg.max_review_len - 1);
    const auto& [pu, pi] = profiles.at(r.id);
    ex.persona = persona_tokens(pu, pi, vocab, cfg.max_encoder_len);
    ex.rating = r.rating;
    return ex;
}

}  // namespace dexr
