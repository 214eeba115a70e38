#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "dexr/error.hpp"

namespace dexr {

enum class schedule_kind { cosine, linear };

inline std::string_view to_string(schedule_kind k) { return k == schedule_kind::cosine ? "cosine" : "linear"; }

inline schedule_kind parse_schedule_kind(std::string_view s) {
    if (s == "cosine") return schedule_kind::cosine;
    if (s == "linear") return schedule_kind::linear;
    throw validation_error("unknown schedule kind '" + std::string(s) + "' (expected cosine|linear)");
}

/// Signal level gamma(t) for t = 0..T: gamma(0) = 1, strictly decreasing,
/// all entries in (0, 1].
struct diffusion_schedule {
    schedule_kind kind = schedule_kind::cosine;
    std::size_t horizon = 0;
    std::vector<double> gamma;

    double operator()(std::size_t t) const {
        if (t > horizon)
            throw validation_error("step " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
        return gamma[t];
    }
};

/// cosine: cos^2(pi t / 2T); linear: 1 - t/T. Values are clipped from below
/// at 1e-5, lowered to half of gamma(T-1) when a long cosine horizon would
/// otherwise flatten the tail.
inline diffusion_schedule make_schedule(schedule_kind kind, std::size_t horizon) {
    if (horizon < 1) throw validation_error("make_schedule: T must be >= 1");
    const double T = static_cast<double>(horizon);
    auto raw = [&](std::size_t t) {
        const double x = static_cast<double>(t) / T;
        if (kind == schedule_kind::cosine) {
            const double c = std::cos(std::numbers::pi * x / 2.0);
            return c * c;
        }
        return 1.0 - x;
    };
    double floor = 1e-5;
    if (horizon >= 2) floor = std::min(floor, 0.5 * raw(horizon - 1));
    diffusion_schedule s{kind, horizon, std::vector<double>(horizon + 1)};
    for (std::size_t t = 0; t <= horizon; ++t) s.gamma[t] = std::clamp(raw(t), floor, 1.0);
    s.gamma[0] = 1.0;
    return s;
}

/// CSV with header "t,gamma".
inline void save_schedule_csv(const diffusion_schedule& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write schedule to " + path);
    out.precision(17);
    out << "t,gamma\n";
    for (std::size_t t = 0; t <= s.horizon; ++t) out << t << ',' << s.gamma[t] << '\n';
}

}  // namespace dexr
