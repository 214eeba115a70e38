#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dexr/corpus/vocabulary.hpp"
#include "dexr/error.hpp"
#include "dexr/model/config.hpp"
#include "dexr/model/layout.hpp"
#include "dexr/numerics/parameters.hpp"
#include "dexr/numerics/tape.hpp"
#include "dexr/random.hpp"

namespace dexr {

/// Transformer encoder over persona tokens, noised transformer decoder over
/// X_t, and the rating / context / word heads.
template <class Real>
struct basic_exr_model {
    model_config config;
    basic_parameter_set<Real> params;
};

using exr_model = basic_exr_model<double>;

/// Dropout is active only when both a rate and a generator are given.
struct dropout_context {
    double rate = 0.0;
    rng_type* rng = nullptr;
    bool active() const noexcept { return rate > 0.0 && rng != nullptr; }
};

namespace detail {

template <class Real>
basic_tensor<Real> normal_tensor(std::vector<std::size_t> shape, double std, rng_type& rng) {
    basic_tensor<Real> t(std::move(shape));
    std::normal_distribution<double> n(0.0, std);
    for (auto& v : t.values()) v = static_cast<Real>(n(rng));
    return t;
}

template <class Real>
void add_layer_norm(basic_parameter_set<Real>& p, const std::string& name, std::size_t d) {
    p.add(name + ".gain", basic_tensor<Real>({1, d}, Real{1}));
    p.add(name + ".bias", basic_tensor<Real>({1, d}));
}

template <class Real>
void add_attention(basic_parameter_set<Real>& p, const std::string& name, std::size_t d, rng_type& rng) {
    const double s = 1.0 / std::sqrt(double(d));
    for (const char* w : {".wq", ".wk", ".wv", ".wo"}) p.add(name + w, normal_tensor<Real>({d, d}, s, rng));
}

template <class Real>
void add_ffn(basic_parameter_set<Real>& p, const std::string& name, std::size_t d, std::size_t f, rng_type& rng) {
    p.add(name + ".w1", normal_tensor<Real>({d, f}, 1.0 / std::sqrt(double(d)), rng));
    p.add(name + ".b1", basic_tensor<Real>({1, f}));
    p.add(name + ".w2", normal_tensor<Real>({f, d}, 1.0 / std::sqrt(double(f)), rng));
    p.add(name + ".b2", basic_tensor<Real>({1, d}));
}

inline std::string layer_name(const char* stack, std::size_t l, const char* part) {
    return std::string(stack) + "." + std::to_string(l) + "." + part;
}

}  // namespace detail

/// Fresh parameters. Embedding tables ~ N(0, 1), timestep table ~ N(0, 0.1),
/// projections ~ N(0, 1/fan_in), layer-norm gains 1, biases 0; the rating
/// head's scalar bias starts at `rating_bias`.
template <class Real>
basic_parameter_set<Real> init_parameters(const model_config& c, rng_type& rng, double rating_bias = 3.0) {
    c.validate();
    basic_parameter_set<Real> p;
    const std::size_t d = c.d_model;
    p.add("user_emb", detail::normal_tensor<Real>({c.num_users, d}, 1.0, rng));
    p.add("item_emb", detail::normal_tensor<Real>({c.num_items, d}, 1.0, rng));
    p.add("word_emb", detail::normal_tensor<Real>({c.vocab_size, d}, 1.0, rng));
    p.add("time_emb", detail::normal_tensor<Real>({c.horizon + 1, d}, 0.1, rng));
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        detail::add_attention(p, detail::layer_name("enc", l, "attn"), d, rng);
        detail::add_layer_norm(p, detail::layer_name("enc", l, "ln1"), d);
        detail::add_ffn(p, detail::layer_name("enc", l, "ffn"), d, c.ffn_dim, rng);
        detail::add_layer_norm(p, detail::layer_name("enc", l, "ln2"), d);
    }
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        detail::add_attention(p, detail::layer_name("dec", l, "self"), d, rng);
        detail::add_layer_norm(p, detail::layer_name("dec", l, "ln1"), d);
        detail::add_attention(p, detail::layer_name("dec", l, "cross"), d, rng);
        detail::add_layer_norm(p, detail::layer_name("dec", l, "ln2"), d);
        detail::add_ffn(p, detail::layer_name("dec", l, "ffn"), d, c.ffn_dim, rng);
        detail::add_layer_norm(p, detail::layer_name("dec", l, "ln3"), d);
    }
    const double s = 1.0 / std::sqrt(double(d));
    p.add("rating.W", detail::normal_tensor<Real>({d, d}, s, rng));
    p.add("rating.b", basic_tensor<Real>({1, d}));
    p.add("rating.w", detail::normal_tensor<Real>({1, d}, s, rng));
    p.add("rating.bias", basic_tensor<Real>({1, 1}, static_cast<Real>(rating_bias)));
    p.add("vocab.W", detail::normal_tensor<Real>({c.vocab_size, d}, s, rng));
    p.add("vocab.b", basic_tensor<Real>({1, c.vocab_size}));
    return p;
}

template <class Real>
basic_exr_model<Real> make_model(const model_config& c, rng_type& rng, double rating_bias = 3.0) {
    return {c, init_parameters<Real>(c, rng, rating_bias)};
}

/// Fixed sinusoidal position codes, one row per position.
template <class Real>
basic_tensor<Real> sinusoidal_encoding(std::size_t length, std::size_t d) {
    auto pe = basic_tensor<Real>::matrix(length, d);
    for (std::size_t pos = 0; pos < length; ++pos)
        for (std::size_t i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -double(i) / double(d));
            pe(pos, i) = static_cast<Real>(std::sin(double(pos) * freq));
            if (i + 1 < d) pe(pos, i + 1) = static_cast<Real>(std::cos(double(pos) * freq));
        }
    return pe;
}

template <class Real>
basic_var<Real> apply_dropout(basic_var<Real> x, const dropout_context* drop) {
    if (!drop || !drop->active()) return x;
    std::bernoulli_distribution keep(1.0 - drop->rate);
    std::vector<unsigned char> mask(x.value().size());
    for (auto& m : mask) m = keep(*drop->rng) ? 1 : 0;
    return dropout(x, mask, static_cast<Real>(drop->rate));
}

/// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated then projected
/// by W^O. Per-head attention matrices are appended to `weights` if given.
template <class Real>
basic_var<Real> multi_head_attention(basic_var<Real> query, basic_var<Real> memory,
                                     const bound_parameters<Real>& p, const std::string& name,
                                     std::size_t heads, const attention_mask* mask = nullptr,
                                     std::vector<basic_var<Real>>* weights = nullptr) {
    const auto q = matmul(query, p[name + ".wq"]);
    const auto k = matmul(memory, p[name + ".wk"]);
    const auto v = matmul(memory, p[name + ".wv"]);
    const std::size_t d = q.cols();
    const std::size_t dk = d / heads;
    const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(double(dk)));
    std::vector<basic_var<Real>> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const auto qh = heads == 1 ? q : slice_cols(q, h * dk, dk);
        const auto kh = heads == 1 ? k : slice_cols(k, h * dk, dk);
        const auto vh = heads == 1 ? v : slice_cols(v, h * dk, dk);
        const auto a = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
        if (weights) weights->push_back(a);
        outs.push_back(matmul(a, vh));
    }
    const auto joined = heads == 1 ? outs.front() : concat_cols(outs);
    return matmul(joined, p[name + ".wo"]);
}

/// LayerNorm(x + sub) with learned gain and bias.
template <class Real>
basic_var<Real> add_and_norm(basic_var<Real> x, basic_var<Real> sub, const bound_parameters<Real>& p,
                             const std::string& name) {
    return add_row(mul_row(layer_norm_rows(add(x, sub)), p[name + ".gain"]), p[name + ".bias"]);
}

/// max(0, h W1 + b1) W2 + b2
template <class Real>
basic_var<Real> feed_forward(basic_var<Real> h, const bound_parameters<Real>& p, const std::string& name) {
    const auto hidden = relu(add_row(matmul(h, p[name + ".w1"]), p[name + ".b1"]));
    return add_row(matmul(hidden, p[name + ".w2"]), p[name + ".b2"]);
}

/// Self-attention encoder over persona/profile tokens; no positional code,
/// so the output is equivariant to permutations of the input.
template <class Real>
basic_var<Real> encode(basic_tape<Real>& tape, const bound_parameters<Real>& p, const model_config& c,
                       std::span<const int> persona, const dropout_context* drop = nullptr,
                       std::vector<basic_var<Real>>* attention = nullptr) {
    (void)tape;
    if (persona.empty()) throw validation_error("encode: empty persona sequence");
    if (persona.size() > c.max_encoder_len)
        throw validation_error("encode: input length " + std::to_string(persona.size()) +
                               " exceeds max_encoder_len " + std::to_string(c.max_encoder_len));
    auto x = gather_rows(p["word_emb"], persona);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        const auto a = multi_head_attention(x, x, p, detail::layer_name("enc", l, "attn"), c.num_heads,
                                            nullptr, attention);
        const auto h = add_and_norm(x, apply_dropout(a, drop), p, detail::layer_name("enc", l, "ln1"));
        const auto f = feed_forward(h, p, detail::layer_name("enc", l, "ffn"));
        x = add_and_norm(h, apply_dropout(f, drop), p, detail::layer_name("enc", l, "ln2"));
    }
    return x;
}

struct sequence_input {
    std::size_t user = 0;
    std::size_t item = 0;
    std::vector<int> keywords;
    std::vector<int> words;  // word-span tokens (review followed by eos when training)
};

/// X_0 = [U[u]; I[i]; W[k..]; W[bos]; W[w..]] + sinusoidal positions.
template <class Real>
std::pair<basic_var<Real>, sequence_layout> build_sequence(basic_tape<Real>& tape, const bound_parameters<Real>& p,
                                                           const model_config& c, const sequence_input& in) {
    if (in.user >= c.num_users) throw validation_error("build_sequence: unknown user index " + std::to_string(in.user));
    if (in.item >= c.num_items) throw validation_error("build_sequence: unknown item index " + std::to_string(in.item));
    if (in.words.empty()) throw validation_error("build_sequence: empty word span");
    if (in.keywords.size() > 2) throw validation_error("build_sequence: at most two keyword slots");
    if (in.words.size() > c.max_review_len)
        throw validation_error("build_sequence: word span " + std::to_string(in.words.size()) +
                               " exceeds max_review_len " + std::to_string(c.max_review_len));
    sequence_layout layout{in.keywords.size(), in.words.size()};
    std::vector<int> tokens = in.keywords;
    tokens.push_back(vocabulary::bos_id);
    tokens.insert(tokens.end(), in.words.begin(), in.words.end());
    const int u = static_cast<int>(in.user), i = static_cast<int>(in.item);
    const auto rows = concat_rows<Real>({gather_rows(p["user_emb"], std::span<const int>(&u, 1)),
                                         gather_rows(p["item_emb"], std::span<const int>(&i, 1)),
                                         gather_rows(p["word_emb"], std::span<const int>(tokens))});
    const auto pe = tape.constant(sinusoidal_encoding<Real>(layout.length(), c.d_model));
    return {add(rows, pe), layout};
}

/// L decoder layers over X_t: masked self-attention, cross-attention to the
/// encoder states, feed-forward; each followed by residual + layer norm. The
/// timestep embedding of t is added to the word-span rows only.
template <class Real>
basic_var<Real> decode(basic_var<Real> x_t, std::size_t t, basic_var<Real> encoder_states,
                       const sequence_layout& layout, const bound_parameters<Real>& p, const model_config& c,
                       const dropout_context* drop = nullptr) {
    if (t > c.horizon)
        throw validation_error("decode: step " + std::to_string(t) + " outside [0, " + std::to_string(c.horizon) + "]");
    if (x_t.rows() != layout.length() || x_t.cols() != c.d_model)
        throw shape_error("decode: input " + shape_string(x_t.shape()) + " does not match layout length " +
                          std::to_string(layout.length()));
    const int step = static_cast<int>(t);
    const auto time = gather_rows(p["time_emb"], std::span<const int>(&step, 1));
    auto x = concat_rows<Real>({slice_rows(x_t, 0, layout.word_begin()),
                                add_row(slice_rows(x_t, layout.word_begin(), layout.word_count), time)});
    const auto mask = decoder_mask(layout);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
        const auto s = multi_head_attention(x, x, p, detail::layer_name("dec", l, "self"), c.num_heads, &mask);
        const auto h1 = add_and_norm(x, apply_dropout(s, drop), p, detail::layer_name("dec", l, "ln1"));
        const auto a = multi_head_attention(h1, encoder_states, p, detail::layer_name("dec", l, "cross"), c.num_heads);
        const auto h2 = add_and_norm(h1, apply_dropout(a, drop), p, detail::layer_name("dec", l, "ln2"));
        const auto f = feed_forward(h2, p, detail::layer_name("dec", l, "ffn"));
        x = add_and_norm(h2, apply_dropout(f, drop), p, detail::layer_name("dec", l, "ln3"));
    }
    return x;
}

/// r = w^r sigmoid(W^r h + b^r) + b, h = first decoder row. Returns 1 x 1.
template <class Real>
basic_var<Real> rating_head(basic_var<Real> hidden, const bound_parameters<Real>& p) {
    const auto h = slice_rows(hidden, sequence_layout::user_pos, 1);
    const auto s = sigmoid(add_row(matmul_nt(h, p["rating.W"]), p["rating.b"]));
    return add(matmul_nt(s, p["rating.w"]), p["rating.bias"]);
}

/// W^v h + b^v on the item-slot row. Returns 1 x |V| logits.
template <class Real>
basic_var<Real> context_logits(basic_var<Real> hidden, const bound_parameters<Real>& p) {
    const auto h = slice_rows(hidden, sequence_layout::item_pos, 1);
    return add_row(matmul_nt(h, p["vocab.W"]), p["vocab.b"]);
}

/// Next-token logits for rows bos .. bos + W - 1 (row j predicts word slot
/// j + 1). Shares W^v, b^v with the context head. Returns W x |V|.
template <class Real>
basic_var<Real> word_logits(basic_var<Real> hidden, const sequence_layout& layout, const bound_parameters<Real>& p) {
    const auto h = slice_rows(hidden, layout.prediction_begin(), layout.word_count);
    return add_row(matmul_nt(h, p["vocab.W"]), p["vocab.b"]);
}

// ---------------------------------------------------------------------------
// Tensor-level head evaluation (no gradients)

template <class Real>
Real predict_rating(const basic_tensor<Real>& hidden_row, const basic_parameter_set<Real>& params) {
    basic_tape<Real> t;
    bound_parameters<Real> p(t, params, false);
    return rating_head(t.constant(hidden_row), p).value().item();
}

template <class Real>
basic_tensor<Real> predict_context(const basic_tensor<Real>& hidden, const basic_parameter_set<Real>& params) {
    basic_tape<Real> t;
    bound_parameters<Real> p(t, params, false);
    return softmax_rows(context_logits(t.constant(hidden), p)).value();
}

template <class Real>
basic_tensor<Real> predict_words(const basic_tensor<Real>& hidden, const sequence_layout& layout,
                                 const basic_parameter_set<Real>& params) {
    basic_tape<Real> t;
    bound_parameters<Real> p(t, params, false);
    return softmax_rows(word_logits(t.constant(hidden), layout, p)).value();
}

}  // namespace dexr
