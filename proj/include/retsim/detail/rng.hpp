#pragma once

#include <cstdint>
#include <string_view>

namespace retsim::detail {

// SplitMix64. Used instead of <random> engines/distributions so that a
// given seed produces the same byte stream on every platform and standard
// library implementation.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, n). Rejection sampling keeps the stream
    // deterministic for a fixed sequence of calls.
    std::uint64_t next_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

    // Inclusive range [lo, hi].
    std::uint64_t next_in(std::uint64_t lo, std::uint64_t hi) {
        return lo + next_below(hi - lo + 1);
    }

    // Uniform in [0, 1), 53 bits of precision.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<unsigned char>(v >> (8 * i));
        h *= 1099511628211ULL;
    }
    return h;
}

// Derives an independent stream seed from (seed, key, purpose, n). Generation
// for one (query, rank) never depends on scheduling order because each unit
// of work re-derives its own stream.
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view key,
                                 std::string_view purpose, std::uint64_t n = 0) {
    std::uint64_t h = fnv1a_u64(seed, 1469598103934665603ULL);
    h = fnv1a(key, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(purpose, h);
    return fnv1a_u64(n, h);
}

}  // namespace retsim::detail
