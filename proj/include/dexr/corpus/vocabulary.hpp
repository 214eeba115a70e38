#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dexr/corpus/text.hpp"
#include "dexr/error.hpp"

namespace dexr {

/// Token <-> id bijection. Ids 0..3 are reserved for pad, bos, eos and unk.
class vocabulary {
public:
    static constexpr int pad_id = 0;
    static constexpr int bos_id = 1;
    static constexpr int eos_id = 2;
    static constexpr int unk_id = 3;
    static constexpr int reserved_count = 4;

    vocabulary() {
        for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) insert(t);
    }

    /// Adds a token if absent; returns its id.
    int add(std::string_view token) {
        if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
        return insert(std::string(token));
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

    int encode(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? unk_id : it->second;
    }

    std::vector<int> encode(const token_list& tokens) const {
        std::vector<int> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(encode(t));
        return out;
    }

    const std::string& decode(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
            throw validation_error("vocabulary: id " + std::to_string(id) + " out of range");
        return tokens_[id];
    }

    token_list decode(std::span<const int> ids) const {
        token_list out;
        out.reserve(ids.size());
        for (int id : ids) out.push_back(decode(id));
        return out;
    }

    /// Non-reserved tokens in id order.
    std::span<const std::string> regular_tokens() const {
        return std::span<const std::string>(tokens_).subspan(reserved_count);
    }

    /// One token per line; line n (0-based) holds id n + 4.
    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw error("cannot write vocabulary to " + path);
        for (const auto& t : regular_tokens()) out << t << '\n';
        if (!out) throw error("failed writing vocabulary to " + path);
    }

    static vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw error("cannot read vocabulary from " + path);
        vocabulary v;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) throw parse_error("empty vocabulary entry", n);
            if (v.contains(line)) throw parse_error("duplicate vocabulary entry '" + line + "'", n);
            v.insert(line);
        }
        return v;
    }

    static vocabulary from_tokens(const std::vector<std::string>& regular) {
        vocabulary v;
        for (const auto& t : regular) v.add(t);
        return v;
    }

    friend bool operator==(const vocabulary& a, const vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    int insert(std::string token) {
        const int id = static_cast<int>(tokens_.size());
        index_.emplace(token, id);
        tokens_.push_back(std::move(token));
        return id;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Counts tokens over `sentences`; tokens with count >= min_count get ids in
/// descending-frequency order, ties by first occurrence.
inline vocabulary build_vocab_from_sentences(const std::vector<token_list>& sentences,
                                             std::size_t min_count) {
    if (min_count < 1) throw validation_error("build_vocab: min_count must be >= 1");
    if (sentences.empty()) throw validation_error("build_vocab: empty corpus");
    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (const auto& s : sentences)
        for (const auto& t : s)
            if (counts[t]++ == 0) order.push_back(t);
    std::vector<std::size_t> rank(order.size());
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return counts[order[a]] > counts[order[b]]; });
    vocabulary v;
    for (std::size_t r : rank)
        if (counts[order[r]] >= min_count) v.add(order[r]);
    return v;
}

}  // namespace dexr
