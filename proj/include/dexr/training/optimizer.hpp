#pragma once

#include <cmath>
#include <cstddef>

#include "dexr/error.hpp"
#include "dexr/numerics/parameters.hpp"

namespace dexr {

struct sgd_report {
    double grad_norm = 0.0;     // global L2 norm before clipping
    double applied_norm = 0.0;  // after clipping
    double clip_scale = 1.0;
};

/// Plain SGD with global-norm clipping: if ||g|| > max_norm every gradient
/// is scaled by max_norm / ||g||; then p <- p - lr g. Nothing is modified if
/// any gradient is non-finite.
template <class Real>
sgd_report sgd_step(basic_parameter_set<Real>& params, const basic_parameter_set<Real>& grads, double lr,
                    double clip_max_norm) {
    if (!(lr > 0.0)) throw validation_error("sgd_step: learning rate must be positive");
    if (!(clip_max_norm > 0.0)) throw validation_error("sgd_step: clip norm must be positive");
    if (grads.size() != params.size()) throw shape_error("sgd_step: gradient set does not match parameters");
    double sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape() != params[i].shape())
            throw shape_error("sgd_step: gradient of '" + params.name(i) + "' has shape " +
                              shape_string(grads[i].shape()));
        for (Real g : grads[i].values()) {
            if (!std::isfinite(static_cast<double>(g)))
                throw domain_error("sgd_step: non-finite gradient in '" + params.name(i) + "'");
            sq += static_cast<double>(g) * static_cast<double>(g);
        }
    }
    sgd_report rep;
    rep.grad_norm = std::sqrt(sq);
    if (rep.grad_norm > clip_max_norm) rep.clip_scale = clip_max_norm / rep.grad_norm;
    rep.applied_norm = rep.grad_norm * rep.clip_scale;
    const double step = lr * rep.clip_scale;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values();
        auto g = grads[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= static_cast<Real>(step * static_cast<double>(g[j]));
    }
    return rep;
}

}  // namespace dexr
