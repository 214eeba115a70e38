#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dexr/corpus/vocabulary.hpp"
#include "dexr/error.hpp"
#include "dexr/numerics/tensor.hpp"

namespace dexr {

struct loss_weights {
    double context = 1.0;
    double rating = 0.1;
    double words = 1.0;
};

struct loss_components {
    double context = 0.0;
    double rating = 0.0;
    double words = 0.0;
};

/// (r - r_hat)^2
inline double loss_rating(double predicted, double truth) {
    const double e = truth - predicted;
    return e * e;
}

/// Mean squared error over a batch.
inline double loss_rating(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw validation_error("loss_rating: batch sizes " + std::to_string(predicted.size()) + " vs " +
                               std::to_string(truth.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += loss_rating(predicted[i], truth[i]);
    return s / double(predicted.size());
}

namespace detail {

inline double neg_log(double p) {
    if (!(p > 0.0)) throw domain_error("negative log-likelihood of a zero-probability token");
    return -std::log(p);
}

}  // namespace detail

/// Bag-of-words NLL of the review under the item-slot distribution p_2.
inline double loss_context(std::span<const double> p2, std::span<const int> review) {
    if (review.empty()) throw validation_error("loss_context: empty review");
    double s = 0.0;
    for (int w : review) s += detail::neg_log(p2[static_cast<std::size_t>(w)]);
    return s / double(review.size());
}

/// Next-token NLL: row j of `probs` scores review[j]; the final row scores eos.
inline double loss_generation(const tensor& probs, std::span<const int> review) {
    if (probs.rows() != review.size() + 1)
        throw validation_error("loss_generation: " + std::to_string(probs.rows()) + " prediction rows for " +
                               std::to_string(review.size()) + " words + eos");
    double s = 0.0;
    for (std::size_t j = 0; j <= review.size(); ++j) {
        const int target = j < review.size() ? review[j] : vocabulary::eos_id;
        s += detail::neg_log(probs(j, static_cast<std::size_t>(target)));
    }
    return s / double(probs.rows());
}

inline double total_loss(const loss_components& c, const loss_weights& w) {
    return w.context * c.context + w.rating * c.rating + w.words * c.words;
}

}  // namespace dexr
