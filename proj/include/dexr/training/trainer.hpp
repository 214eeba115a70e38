#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "dexr/corpus/vocabulary.hpp"
#include "dexr/diffusion/corrupt.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/model/inputs.hpp"
#include "dexr/model/network.hpp"
#include "dexr/numerics/parameters.hpp"
#include "dexr/random.hpp"
#include "dexr/training/losses.hpp"
#include "dexr/training/lr_schedule.hpp"
#include "dexr/training/optimizer.hpp"

namespace dexr {

struct train_config {
    loss_weights weights;
    std::size_t batch_size = 32;
    double learning_rate = 1.0;
    double clip_max_norm = 1.0;
    lr_policy policy;
    std::size_t max_epochs = 500;
    std::uint64_t seed = 1;
    /// Train without corruption (t = 0 for every record).
    bool ablate_diffusion = false;

    void validate() const {
        if (weights.context < 0 || weights.rating < 0 || weights.words < 0)
            throw validation_error("train_config: loss weights must be non-negative");
        if (weights.context + weights.rating + weights.words <= 0)
            throw validation_error("train_config: at least one loss weight must be positive");
        if (!(policy.decay > 0.0 && policy.decay < 1.0)) throw validation_error("train_config: decay in (0, 1)");
        if (batch_size < 1) throw validation_error("train_config: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw validation_error("train_config: learning rate must be positive");
        if (!(clip_max_norm > 0.0)) throw validation_error("train_config: clip norm must be positive");
        if (policy.stop_after < 1) throw validation_error("train_config: stop_after must be >= 1");
    }
};

struct epoch_log {
    std::size_t epoch = 0;
    double loss_total = 0.0;
    double loss_r = 0.0;
    double loss_ctx = 0.0;
    double loss_w = 0.0;
    double lr = 0.0;      // learning rate used during the epoch
    std::size_t counter = 0;
};

inline nlohmann::ordered_json to_json(const epoch_log& e) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss_total"] = e.loss_total;
    j["loss_r"] = e.loss_r;
    j["loss_ctx"] = e.loss_ctx;
    j["loss_w"] = e.loss_w;
    j["lr"] = e.lr;
    j["counter"] = e.counter;
    return j;
}

/// Graph nodes of the per-record objective.
template <class Real>
struct record_loss {
    basic_var<Real> total;
    basic_var<Real> rating_prediction;
    loss_components values;
};

/// Per-record objective at step t with pre-drawn noise (word_count x d):
/// lambda_ctx * L_ctx + lambda_r * L_r + lambda_w * L_w. Components whose
/// weight is zero are left out of the graph, so their heads get no gradient.
template <class Real>
record_loss<Real> record_objective(basic_tape<Real>& tape, const bound_parameters<Real>& p, const model_config& c,
                                   const model_example& ex, std::size_t t, const diffusion_schedule& schedule,
                                   const basic_tensor<Real>& noise, const loss_weights& w,
                                   const dropout_context* drop = nullptr) {
    if (ex.review.empty()) throw validation_error("record '" + ex.id + "': empty review");
    const auto enc = encode(tape, p, c, ex.persona, drop);
    std::vector<int> words = ex.review;
    words.push_back(vocabulary::eos_id);
    auto [x0, layout] = build_sequence(tape, p, c, sequence_input{ex.user, ex.item, ex.keywords, words});
    const auto xt = corrupt(x0, layout, t, schedule, noise);
    const auto hidden = decode(xt, t, enc, layout, p, c, drop);

    const auto r_hat = rating_head(hidden, p);
    const auto l_r = sum(square(add_scalar(r_hat, static_cast<Real>(-ex.rating))));

    const std::vector<std::size_t> ctx_rows(ex.review.size(), 0);
    const auto l_ctx = nll_pick(context_logits(hidden, p), std::span<const std::size_t>(ctx_rows),
                                std::span<const int>(ex.review));

    std::vector<std::size_t> word_rows(words.size());
    for (std::size_t j = 0; j < word_rows.size(); ++j) word_rows[j] = j;
    const auto l_w = nll_pick(word_logits(hidden, layout, p), std::span<const std::size_t>(word_rows),
                              std::span<const int>(words));

    std::vector<basic_var<Real>> terms;
    if (w.context > 0) terms.push_back(scale(l_ctx, static_cast<Real>(w.context)));
    if (w.rating > 0) terms.push_back(scale(l_r, static_cast<Real>(w.rating)));
    if (w.words > 0) terms.push_back(scale(l_w, static_cast<Real>(w.words)));
    auto total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    const auto to_scalar = [](basic_var<Real> v) { return static_cast<double>(v.value().item()); };
    return {total, r_hat, {to_scalar(l_ctx), to_scalar(l_r), to_scalar(l_w)}};
}

/// Mini-batch SGD over model examples. Each record draws its own t ~ U{1..T}
/// (t = 0 when diffusion is ablated) and noise; batch gradients are the mean
/// of per-record gradients, reduced in record order.
template <class Real>
class trainer {
public:
    trainer(basic_exr_model<Real>& model, diffusion_schedule schedule, train_config cfg)
        : model_(&model), schedule_(std::move(schedule)), cfg_(cfg), streams_(cfg.seed),
          noise_rng_(streams_.stream("noise")), order_rng_(streams_.stream("order")),
          dropout_rng_(streams_.stream("dropout")) {
        cfg_.validate();
        model.config.validate();
        if (schedule_.horizon > model.config.horizon)
            throw validation_error("trainer: schedule horizon exceeds the model's timestep table");
        state_.lr = cfg_.learning_rate;
    }

    const lr_state& state() const noexcept { return state_; }
    const train_config& config() const noexcept { return cfg_; }

    std::size_t sample_step() {
        if (cfg_.ablate_diffusion) return 0;
        return std::uniform_int_distribution<std::size_t>(1, schedule_.horizon)(noise_rng_);
    }

    basic_tensor<Real> sample_noise(std::size_t rows) {
        auto n = basic_tensor<Real>::matrix(rows, model_->config.d_model);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (auto& v : n.values()) v = static_cast<Real>(normal(noise_rng_));
        return n;
    }

    /// One optimisation step on `batch`; returns summed (unweighted-by-batch)
    /// component values and total.
    std::pair<loss_components, double> step(std::span<const model_example* const> batch) {
        auto accum = model_->params.zeros_like();
        loss_components sums;
        double total = 0.0;
        const dropout_context drop{model_->config.dropout, &dropout_rng_};
        const Real inv = static_cast<Real>(1.0 / double(batch.size()));
        for (const model_example* ex : batch) {
            const std::size_t t = sample_step();
            const auto noise = sample_noise(ex->review.size() + 1);
            basic_tape<Real> tape;
            bound_parameters<Real> p(tape, model_->params);
            auto loss = record_objective(tape, p, model_->config, *ex, t, schedule_, noise, cfg_.weights, &drop);
            tape.backward(loss.total);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const std::size_t id = p[i].id();
                if (!tape.has_grad(id)) continue;
                auto dst = accum[i].values();
                auto src = tape.grad_ref(id).values();
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += inv * src[j];
            }
            sums.context += loss.values.context;
            sums.rating += loss.values.rating;
            sums.words += loss.values.words;
            total += static_cast<double>(loss.total.value().item());
        }
        sgd_step(model_->params, accum, state_.lr, cfg_.clip_max_norm);
        return {sums, total};
    }

    /// One pass over `examples` in a freshly shuffled order, followed by the
    /// learning-rate update.
    epoch_log run_epoch(const std::vector<model_example>& examples) {
        if (examples.empty()) throw validation_error("train: empty training split");
        std::vector<const model_example*> order;
        order.reserve(examples.size());
        for (const auto& e : examples) order.push_back(&e);
        std::shuffle(order.begin(), order.end(), order_rng_);

        epoch_log log;
        log.lr = state_.lr;
        loss_components sums;
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += cfg_.batch_size) {
            const std::size_t n = std::min(cfg_.batch_size, order.size() - b);
            auto [s, tot] = step(std::span<const model_example* const>(order.data() + b, n));
            sums.context += s.context;
            sums.rating += s.rating;
            sums.words += s.words;
            total += tot;
        }
        const double n = double(order.size());
        log.loss_ctx = sums.context / n;
        log.loss_r = sums.rating / n;
        log.loss_w = sums.words / n;
        log.loss_total = total / n;
        state_ = lr_schedule_step(state_, log.loss_total, cfg_.policy);
        log.epoch = state_.epoch;
        log.counter = state_.counter;
        return log;
    }

    /// Runs until the stop rule fires or max_epochs is reached.
    std::vector<epoch_log> train(const std::vector<model_example>& examples,
                                 const std::function<void(const epoch_log&)>& on_epoch = {}) {
        std::vector<epoch_log> logs;
        while (!state_.stop && state_.epoch < cfg_.max_epochs) {
            logs.push_back(run_epoch(examples));
            if (on_epoch) on_epoch(logs.back());
        }
        return logs;
    }

private:
    basic_exr_model<Real>* model_;
    diffusion_schedule schedule_;
    train_config cfg_;
    seed_streams streams_;
    rng_type noise_rng_;
    rng_type order_rng_;
    rng_type dropout_rng_;
    lr_state state_;
};

/// Mean total loss and components over `examples` at fixed-seed steps and
/// noise, without updating anything.
template <class Real>
std::pair<loss_components, double> evaluate_objective(const basic_exr_model<Real>& model,
                                                      const std::vector<model_example>& examples,
                                                      const diffusion_schedule& schedule, const loss_weights& w,
                                                      std::uint64_t seed, bool ablate_diffusion = false) {
    rng_type rng = seed_streams(seed).stream("eval");
    std::normal_distribution<double> normal(0.0, 1.0);
    loss_components sums;
    double total = 0.0;
    for (const auto& ex : examples) {
        const std::size_t t =
            ablate_diffusion ? 0 : std::uniform_int_distribution<std::size_t>(1, schedule.horizon)(rng);
        auto noise = basic_tensor<Real>::matrix(ex.review.size() + 1, model.config.d_model);
        for (auto& v : noise.values()) v = static_cast<Real>(normal(rng));
        basic_tape<Real> tape;
        bound_parameters<Real> p(tape, model.params, false);
        auto loss = record_objective(tape, p, model.config, ex, t, schedule, noise, w);
        sums.context += loss.values.context;
        sums.rating += loss.values.rating;
        sums.words += loss.values.words;
        total += static_cast<double>(loss.total.value().item());
    }
    const double n = double(std::max<std::size_t>(1, examples.size()));
    return {{sums.context / n, sums.rating / n, sums.words / n}, total / n};
}

}  // namespace dexr
