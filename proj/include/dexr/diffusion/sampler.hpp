#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dexr/corpus/vocabulary.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/model/network.hpp"
#include "dexr/random.hpp"

namespace dexr {

struct sample_options {
    std::size_t stride = 1;
    std::size_t span = 0;  // word slots; 0 means config.max_review_len
    /// Model trained without noise: every decode runs at t = 0 and estimates
    /// are fed back without re-noising.
    bool ablated = false;
};

struct sample_result {
    std::vector<int> tokens;  // truncated before the first eos
    double rating = 0.0;
    std::vector<std::size_t> steps;  // visited t, in order
};

/// Encoder states as a plain tensor, for reuse across decode calls.
template <class Real>
basic_tensor<Real> encode_states(const basic_exr_model<Real>& model, std::span<const int> persona) {
    basic_tape<Real> t;
    bound_parameters<Real> p(t, model.params, false);
    return encode(t, p, model.config, persona).value();
}

namespace detail {

inline int argmax_row(std::span<const double> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}
inline int argmax_row(std::span<const float> row) {
    return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace detail

/// Iterative denoising from X_T ~ N(0, I) on the word span. At each visited
/// step the decoder's next-token distributions are rounded to their argmax
/// tokens, whose embeddings (plus positions) form the clean estimate X^_0;
/// the estimate is re-noised to the next visited step with fresh noise.
/// Steps run T, T - stride, ... down to 0, where tokens are emitted.
template <class Real>
sample_result reverse_sample(const basic_exr_model<Real>& model, std::size_t user, std::size_t item,
                             const std::vector<int>& keywords, const basic_tensor<Real>& encoder_states,
                             const diffusion_schedule& schedule, const sample_options& opts, rng_type& rng) {
    const auto& c = model.config;
    if (opts.stride < 1) throw validation_error("reverse_sample: stride must be >= 1");
    if (schedule.horizon > c.horizon)
        throw validation_error("reverse_sample: schedule horizon exceeds the model's timestep table");
    const std::size_t span = opts.span ? opts.span : c.max_review_len;
    std::normal_distribution<double> normal(0.0, 1.0);

    // Prefix rows never change; only the word slots are resampled.
    sequence_input in{user, item, keywords, std::vector<int>(span, vocabulary::pad_id)};
    basic_tensor<Real> x;
    sequence_layout layout;
    {
        basic_tape<Real> t;
        bound_parameters<Real> p(t, model.params, false);
        auto [x0, lay] = build_sequence(t, p, c, in);
        x = x0.value();
        layout = lay;
    }
    const std::size_t d = c.d_model;
    const auto pe = sinusoidal_encoding<Real>(layout.length(), d);
    const auto& word_table = model.params.at("word_emb");
    for (std::size_t w = 0; w < span; ++w)
        for (std::size_t j = 0; j < d; ++j) x(layout.word_begin() + w, j) = static_cast<Real>(normal(rng));

    sample_result result;
    std::vector<int> tokens(span, vocabulary::eos_id);
    std::size_t t = schedule.horizon;
    while (true) {
        result.steps.push_back(t);
        basic_tape<Real> tape;
        bound_parameters<Real> p(tape, model.params, false);
        const auto enc = tape.constant(encoder_states);
        const auto hidden = decode(tape.constant(x), opts.ablated ? 0 : t, enc, layout, p, c);
        const auto logits = word_logits(hidden, layout, p).value();
        for (std::size_t w = 0; w < span; ++w) tokens[w] = detail::argmax_row(logits.row(w));
        result.rating = static_cast<double>(rating_head(hidden, p).value().item());

        const std::size_t next = t > opts.stride ? t - opts.stride : 0;
        if (next == 0) break;
        const double g = opts.ablated ? 1.0 : schedule(next);
        const Real a = static_cast<Real>(std::sqrt(g));
        const Real b = static_cast<Real>(std::sqrt(1.0 - g));
        for (std::size_t w = 0; w < span; ++w) {
            const std::size_t r = layout.word_begin() + w;
            const auto emb = word_table.row(static_cast<std::size_t>(tokens[w]));
            for (std::size_t j = 0; j < d; ++j) {
                const Real clean = emb[j] + pe(r, j);
                const Real e = opts.ablated ? Real{0} : static_cast<Real>(normal(rng));
                x(r, j) = a * clean + b * e;
            }
        }
        t = next;
    }
    auto eos = std::find(tokens.begin(), tokens.end(), vocabulary::eos_id);
    result.tokens.assign(tokens.begin(), eos);
    return result;
}

}  // namespace dexr
