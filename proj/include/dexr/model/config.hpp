#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "dexr/error.hpp"

namespace dexr {

/// Which keyword slots precede the bos token.
enum class keyword_mode { none, feature, feature_opinion };

inline std::string_view to_string(keyword_mode m) {
    switch (m) {
        case keyword_mode::none: return "none";
        case keyword_mode::feature: return "F";
        case keyword_mode::feature_opinion: return "FO";
    }
    return "none";
}

inline keyword_mode parse_keyword_mode(std::string_view s) {
    if (s == "none") return keyword_mode::none;
    if (s == "F") return keyword_mode::feature;
    if (s == "FO") return keyword_mode::feature_opinion;
    throw validation_error("unknown keyword mode '" + std::string(s) + "' (expected none|F|FO)");
}

inline std::size_t keyword_slots(keyword_mode m) {
    return m == keyword_mode::none ? 0 : (m == keyword_mode::feature ? 1 : 2);
}

struct model_config {
    std::size_t d_model = 32;
    std::size_t num_heads = 2;
    std::size_t num_layers = 2;
    std::size_t ffn_dim = 64;
    std::size_t max_encoder_len = 64;
    std::size_t max_review_len = 16;  // word slots, eos included
    std::size_t vocab_size = 0;
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t horizon = 200;  // T; the timestep table has T + 1 rows
    double dropout = 0.2;

    void validate() const {
        if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0)
            throw validation_error("model_config: d_model must be a positive multiple of num_heads");
        if (num_layers < 1) throw validation_error("model_config: num_layers must be >= 1");
        if (ffn_dim == 0) throw validation_error("model_config: ffn_dim must be positive");
        if (vocab_size < 5) throw validation_error("model_config: vocab_size must cover reserved ids and one token");
        if (num_users == 0 || num_items == 0) throw validation_error("model_config: need users and items");
        if (horizon < 1) throw validation_error("model_config: horizon must be >= 1");
        if (max_encoder_len < 2 || max_review_len < 2)
            throw validation_error("model_config: max lengths too small");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw validation_error("model_config: dropout in [0, 1)");
    }

    friend bool operator==(const model_config&, const model_config&) = default;
};

/// Closed-form number of trainable scalars.
inline std::size_t parameter_count(const model_config& c) {
    const std::size_t d = c.d_model, f = c.ffn_dim, V = c.vocab_size;
    const std::size_t attn = 4 * d * d;
    const std::size_t norm = 2 * d;
    const std::size_t ffn = d * f + f + f * d + d;
    const std::size_t tables = (c.num_users + c.num_items + V + c.horizon + 1) * d;
    const std::size_t encoder = c.num_layers * (attn + norm + ffn + norm);
    const std::size_t decoder = c.num_layers * (2 * attn + 3 * norm + ffn);
    const std::size_t heads = d * d + d + d + 1 + V * d + V;
    return tables + encoder + decoder + heads;
}

}  // namespace dexr
