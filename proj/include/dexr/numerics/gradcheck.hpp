#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "dexr/error.hpp"
#include "dexr/numerics/parameters.hpp"
#include "dexr/numerics/tape.hpp"

namespace dexr {

struct gradient_check_result {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coordinates = 0;
};

/// Compares tape gradients with central differences on every coordinate.
/// `loss_fn(tape&, const bound_parameters<double>&) -> var` must build a
/// scalar loss from the bound parameters. Per-coordinate error is
/// |a - n| / max(1e-8, |a| + |n|).
template <class LossFn>
gradient_check_result finite_difference_report(LossFn&& loss_fn, parameter_set params, double eps) {
    if (!(eps >= 1e-6 && eps <= 1e-4))
        throw validation_error("finite_difference_check: eps " + std::to_string(eps) +
                               " outside [1e-6, 1e-4]");
    parameter_set analytic;
    {
        tape t;
        bound_parameters<double> bound(t, params);
        analytic = backward(t, loss_fn(t, bound), bound);
    }
    auto evaluate = [&] {
        tape t;
        bound_parameters<double> bound(t, params, false);
        const double v = loss_fn(t, bound).value().item();
        if (!std::isfinite(v)) throw domain_error("finite_difference_check: non-finite loss");
        return v;
    };

    gradient_check_result result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + eps;
            const double up = evaluate();
            values[i] = saved - eps;
            const double down = evaluate();
            values[i] = saved;
            const double n = (up - down) / (2.0 * eps);
            const double a = analytic[p][i];
            const double rel = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
            ++result.coordinates;
            if (rel > result.max_relative_error || result.coordinates == 1) {
                result.max_relative_error = std::max(rel, result.max_relative_error);
                if (rel >= result.max_relative_error) {
                    result.worst_parameter = params.name(p);
                    result.worst_index = i;
                    result.analytic = a;
                    result.numeric = n;
                }
            }
        }
    }
    return result;
}

template <class LossFn>
double finite_difference_check(LossFn&& loss_fn, const parameter_set& params, double eps) {
    return finite_difference_report(std::forward<LossFn>(loss_fn), params, eps).max_relative_error;
}

}  // namespace dexr
