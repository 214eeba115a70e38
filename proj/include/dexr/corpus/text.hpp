#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace dexr {

using token_list = std::vector<std::string>;

/// Lowercases ASCII letters, deletes ASCII punctuation and splits on
/// whitespace. Bytes >= 0x80 (UTF-8 continuation) pass through unchanged.
inline token_list tokenize(std::string_view text) {
    token_list out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else if (c < 0x80 && std::ispunct(c)) {
            continue;
        } else {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::string detokenize(const token_list& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

/// Splits already-normalised text on single spaces without re-normalising,
/// so reserved markers such as "<unk>" survive.
inline token_list split_tokens(std::string_view text) {
    token_list out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        while (pos < text.size() && text[pos] == ' ') ++pos;
        const std::size_t end = text.find(' ', pos);
        const std::size_t stop = end == std::string_view::npos ? text.size() : end;
        if (stop > pos) out.emplace_back(text.substr(pos, stop - pos));
        pos = stop;
    }
    return out;
}

}  // namespace dexr
