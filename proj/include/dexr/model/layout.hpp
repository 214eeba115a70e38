#pragma once

#include <algorithm>
#include <cstddef>

#include "dexr/numerics/tape.hpp"

namespace dexr {

/// Positions of X_0 = [u, i, k_1..k_K, bos, w_1..w_W] (0-indexed).
struct sequence_layout {
    std::size_t keyword_count = 0;
    std::size_t word_count = 0;

    static constexpr std::size_t user_pos = 0;
    static constexpr std::size_t item_pos = 1;
    std::size_t keyword_begin() const noexcept { return 2; }
    std::size_t bos_pos() const noexcept { return keyword_count + 2; }
    std::size_t word_begin() const noexcept { return keyword_count + 3; }
    std::size_t length() const noexcept { return word_begin() + word_count; }
    /// Rows whose outputs predict the next word: bos and every word slot but the last.
    std::size_t prediction_begin() const noexcept { return bos_pos(); }
    bool is_word(std::size_t pos) const noexcept { return pos >= word_begin() && pos < length(); }

    friend bool operator==(const sequence_layout&, const sequence_layout&) = default;
};

/// Prefix rows (user, item, keywords, bos) see each other; word rows see the
/// whole prefix and earlier words.
inline attention_mask decoder_mask(const sequence_layout& layout) {
    const std::size_t n = layout.length();
    attention_mask m(n, n, false);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c <= std::max(r, layout.bos_pos()) && c < n; ++c) m.set(r, c, true);
    return m;
}

}  // namespace dexr
