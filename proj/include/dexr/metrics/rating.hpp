#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "dexr/error.hpp"

namespace dexr {

namespace detail {
inline void require_rating_pairs(const char* what, std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw validation_error(std::string(what) + ": " + std::to_string(pred.size()) + " predictions vs " +
                               std::to_string(truth.size()) + " ratings");
    if (pred.empty()) throw validation_error(std::string(what) + ": no ratings");
}
}  // namespace detail

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
    detail::require_rating_pairs("rmse", pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(s / double(pred.size()));
}

inline double mae(std::span<const double> pred, std::span<const double> truth) {
    detail::require_rating_pairs("mae", pred, truth);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / double(pred.size());
}

}  // namespace dexr
