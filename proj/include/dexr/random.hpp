#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dexr {

using rng_type = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Named, independent generators derived from one root seed ("data",
/// "init", "noise", "sampler", ...). Same root and name, same stream.
class seed_streams {
public:
    explicit seed_streams(std::uint64_t root) : root_(root) {}

    std::uint64_t root() const noexcept { return root_; }
    std::uint64_t seed_for(std::string_view name) const { return splitmix64(root_ ^ fnv1a(name)); }
    rng_type stream(std::string_view name) const { return rng_type(seed_for(name)); }

private:
    std::uint64_t root_;
};

/// Standard normal draws from an external generator.
class gaussian_noise {
public:
    explicit gaussian_noise(rng_type& rng) : rng_(&rng) {}
    double operator()() { return dist_(*rng_); }

private:
    rng_type* rng_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Noise source that always returns zero (deterministic corruption tests).
struct zero_noise {
    double operator()() const noexcept { return 0.0; }
};

}  // namespace dexr
