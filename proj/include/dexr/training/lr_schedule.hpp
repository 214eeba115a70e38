#pragma once

#include <cstddef>
#include <limits>

namespace dexr {

struct lr_policy {
    double decay = 0.8;
    std::size_t stop_after = 10;
    /// false: the plateau counter is cumulative over the run.
    /// true: it resets on every improvement (patience).
    bool reset_on_improve = false;
};

struct lr_state {
    std::size_t epoch = 0;
    double lr = 1.0;
    double best = std::numeric_limits<double>::infinity();
    std::size_t counter = 0;
    bool stop = false;
};

/// End-of-epoch update: a loss that does not beat the best so far decays the
/// learning rate and bumps the counter; STOP once the counter reaches the
/// threshold. A stopped state is returned unchanged.
inline lr_state lr_schedule_step(lr_state s, double epoch_loss, const lr_policy& policy = {}) {
    if (s.stop) return s;
    ++s.epoch;
    if (epoch_loss >= s.best) {
        s.lr *= policy.decay;
        ++s.counter;
    } else {
        s.best = epoch_loss;
        if (policy.reset_on_improve) s.counter = 0;
    }
    if (s.counter >= policy.stop_after) s.stop = true;
    return s;
}

}  // namespace dexr
