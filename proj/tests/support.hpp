#pragma once

// Small fixtures shared by the unit tests and the acceptance binary.

#include <string>
#include <vector>

#include "dexr/dexr.hpp"

namespace dexr::testing {

/// d=8, h=2, L=2, |V|=20, T=8, dropout off.
inline model_config tiny_config() {
    model_config c;
    c.d_model = 8;
    c.num_heads = 2;
    c.num_layers = 2;
    c.ffn_dim = 16;
    c.max_encoder_len = 8;
    c.max_review_len = 6;
    c.vocab_size = 20;
    c.num_users = 3;
    c.num_items = 3;
    c.horizon = 8;
    c.dropout = 0.0;
    return c;
}

inline model_example tiny_example() {
    return model_example{"r", 1, 2, {7, 9}, {5, 6, 8, 5}, {4, 10, 11, 12, 13}, 4.0};
}

inline basic_tensor<double> normal_matrix(std::size_t rows, std::size_t cols, rng_type& rng) {
    auto m = basic_tensor<double>::matrix(rows, cols);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : m.values()) v = normal(rng);
    return m;
}

/// Ten sentences from one template "the F is really O", one per (user, item)
/// pair, each with a distinct feature/opinion combination.
struct memorization_corpus {
    vocabulary vocab;
    std::vector<token_list> sentences;
    std::vector<model_example> examples;
    model_config config;
};

inline memorization_corpus make_memorization_corpus() {
    static const char* features[] = {"fit", "color", "size", "zipper", "strap"};
    static const char* opinions[] = {"great", "poor"};
    memorization_corpus m;
    for (const char* w : {"the", "is", "really"}) m.vocab.add(w);
    for (const char* w : features) m.vocab.add(w);
    for (const char* w : opinions) m.vocab.add(w);
    for (std::size_t s = 0; s < 10; ++s) {
        token_list sentence{"the", features[s % 5], "is", "really", opinions[s / 5]};
        model_example ex;
        ex.id = "m" + std::to_string(s);
        ex.user = s;
        ex.item = s;
        ex.review = m.vocab.encode(sentence);
        ex.persona = {m.vocab.encode(features[s % 5]), m.vocab.encode("the")};
        ex.rating = s < 5 ? 5.0 : 2.0;
        m.sentences.push_back(std::move(sentence));
        m.examples.push_back(std::move(ex));
    }
    model_config& c = m.config;
    c.d_model = 16;
    c.num_heads = 2;
    c.num_layers = 2;
    c.ffn_dim = 32;
    c.max_encoder_len = 4;
    c.max_review_len = 6;
    c.vocab_size = m.vocab.size();
    c.num_users = 10;
    c.num_items = 10;
    c.horizon = 20;
    c.dropout = 0.0;
    return m;
}

/// Hand-simulated 30 epochs of the cumulative decay rule (decay 0.8, stop at
/// 10): plateaus are spread between improvements; the tenth, at epoch 30,
/// stops with lr = 0.8^10.
struct lr_trace_row {
    double loss;
    std::size_t counter;
    double lr;
    double best;
};

inline const std::vector<lr_trace_row>& lr_trace() {
    static const std::vector<lr_trace_row> rows = {
        {5.0, 0, 1.0, 5.0},         {4.0, 0, 1.0, 4.0},         {4.0, 1, 0.8, 4.0},
        {3.5, 1, 0.8, 3.5},         {3.6, 2, 0.64, 3.5},        {3.4, 2, 0.64, 3.4},
        {3.4, 3, 0.512, 3.4},       {3.0, 3, 0.512, 3.0},       {3.1, 4, 0.4096, 3.0},
        {3.2, 5, 0.32768, 3.0},     {2.9, 5, 0.32768, 2.9},     {2.8, 5, 0.32768, 2.8},
        {2.8, 6, 0.262144, 2.8},    {2.7, 6, 0.262144, 2.7},    {2.6, 6, 0.262144, 2.6},
        {2.5, 6, 0.262144, 2.5},    {2.4, 6, 0.262144, 2.4},    {2.6, 7, 0.2097152, 2.4},
        {2.3, 7, 0.2097152, 2.3},   {2.2, 7, 0.2097152, 2.2},   {2.1, 7, 0.2097152, 2.1},
        {2.0, 7, 0.2097152, 2.0},   {2.05, 8, 0.16777216, 2.0}, {1.9, 8, 0.16777216, 1.9},
        {1.8, 8, 0.16777216, 1.8},  {1.7, 8, 0.16777216, 1.7},  {1.95, 9, 0.134217728, 1.7},
        {1.6, 9, 0.134217728, 1.6}, {1.5, 9, 0.134217728, 1.5}, {1.5, 10, 0.1073741824, 1.5},
    };
    return rows;
}

}  // namespace dexr::testing
