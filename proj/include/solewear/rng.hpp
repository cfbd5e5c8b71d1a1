#pragma once

#include <cstdint>

namespace solewear {

// Deterministic generators used everywhere randomness is needed. Standard
// library distributions are implementation-defined, so sampling goes through
// these to keep results identical across platforms and compilers.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// PCG-XSH-RR with 64-bit state, 32-bit output.
class Pcg32 {
public:
    explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += splitmix64(seed);
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n).
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>((next_u64() >> 11) % n);
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

// Stateless coordinate hash; same (seed, x, y, salt) always gives the same
// value, independent of evaluation order.
inline std::uint64_t hash_coords(std::uint64_t seed, std::int64_t x, std::int64_t y,
                                 std::uint64_t salt = 0) {
    std::uint64_t h = splitmix64(seed ^ (salt * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull));
    h = splitmix64(h ^ static_cast<std::uint64_t>(x));
    h = splitmix64(h ^ static_cast<std::uint64_t>(y));
    return h;
}

// Coordinate hash mapped to [0, 1).
inline double hash_unit(std::uint64_t seed, std::int64_t x, std::int64_t y,
                        std::uint64_t salt = 0) {
    return static_cast<double>(hash_coords(seed, x, y, salt) >> 11) * 0x1.0p-53;
}

} // namespace solewear
