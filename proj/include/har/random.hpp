#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace har::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

inline constexpr std::uint64_t mix(std::uint64_t seed, std::string_view key) noexcept {
    return splitmix64(seed ^ splitmix64(fnv1a(key)));
}

inline constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t key) noexcept {
    return splitmix64(seed ^ splitmix64(key));
}

// Top 53 bits as a double in [0, 1).
inline constexpr double to_unit(std::uint64_t x) noexcept {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Keyed draw in [0,1): depends only on (seed, key), not on call order.
inline constexpr double keyed_uniform(std::uint64_t seed, std::string_view key) noexcept {
    return to_unit(mix(seed, key));
}

// std distributions are implementation-defined, so streams draw through to_unit
// to stay identical across standard libraries.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(splitmix64(seed)) {}

    double uniform() { return to_unit(eng_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    // Uniform integer in [0, n); n > 0. Rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do x = eng_();
        while (x >= limit);
        return x % n;
    }
    std::uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace har::rng
