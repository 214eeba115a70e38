#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "dexr/diffusion/schedule.hpp"
#include "dexr/error.hpp"
#include "dexr/model/layout.hpp"
#include "dexr/numerics/tape.hpp"
#include "dexr/numerics/tensor.hpp"

namespace dexr {

/// X_t and the noise drawn for it (one row per word slot).
template <class Real>
struct corruption {
    basic_tensor<Real> x_t;
    basic_tensor<Real> noise;
};

namespace detail {

inline void check_step(std::size_t t, const diffusion_schedule& s) {
    if (t > s.horizon)
        throw validation_error("corrupt: step " + std::to_string(t) + " outside [0, " + std::to_string(s.horizon) + "]");
}

}  // namespace detail

/// Word-span rows: X_t = sqrt(gamma(t)) X_0 + sqrt(1 - gamma(t)) eps. All
/// other rows are copied unchanged. `noise()` yields standard normal draws.
template <class Real, class Noise>
corruption<Real> corrupt(const basic_tensor<Real>& x0, const sequence_layout& layout, std::size_t t,
                         const diffusion_schedule& schedule, Noise&& noise) {
    detail::check_step(t, schedule);
    if (x0.rows() != layout.length())
        throw shape_error("corrupt: " + shape_string(x0.shape()) + " vs layout length " + std::to_string(layout.length()));
    const std::size_t d = x0.cols();
    const double g = schedule(t);
    const Real a = static_cast<Real>(std::sqrt(g));
    const Real b = static_cast<Real>(std::sqrt(1.0 - g));
    corruption<Real> out{x0, basic_tensor<Real>::matrix(layout.word_count, d)};
    for (std::size_t w = 0; w < layout.word_count; ++w) {
        const std::size_t r = layout.word_begin() + w;
        for (std::size_t j = 0; j < d; ++j) {
            const Real e = static_cast<Real>(noise());
            out.noise(w, j) = e;
            out.x_t(r, j) = a * x0(r, j) + b * e;
        }
    }
    return out;
}

/// Differentiable form with pre-drawn noise (word_count x d). Non-word rows
/// pass through as x * 1 + 0, which is bit-exact.
template <class Real>
basic_var<Real> corrupt(basic_var<Real> x0, const sequence_layout& layout, std::size_t t,
                        const diffusion_schedule& schedule, const basic_tensor<Real>& noise) {
    detail::check_step(t, schedule);
    const std::size_t n = x0.rows(), d = x0.cols();
    if (n != layout.length() || noise.rows() != layout.word_count || noise.cols() != d)
        throw shape_error("corrupt: x0 " + shape_string(x0.shape()) + ", noise " + shape_string(noise.shape()) +
                          " vs layout length " + std::to_string(layout.length()));
    const double g = schedule(t);
    auto coef = basic_tensor<Real>::matrix(n, d, Real{1});
    auto shift = basic_tensor<Real>::matrix(n, d);
    for (std::size_t w = 0; w < layout.word_count; ++w)
        for (std::size_t j = 0; j < d; ++j) {
            coef(layout.word_begin() + w, j) = static_cast<Real>(std::sqrt(g));
            shift(layout.word_begin() + w, j) = static_cast<Real>(std::sqrt(1.0 - g)) * noise(w, j);
        }
    auto& tape = x0.tape();
    return add(mul(x0, tape.constant(std::move(coef))), tape.constant(std::move(shift)));
}

}  // namespace dexr
