#pragma once

// Explicit-state pseudo-random stream. The state is a value threaded by the
// caller; drawing never mutates, it returns the successor state. The step is
// the SplitMix64 mix, pinned bit-for-bit:
//
//   state' = state + 0x9E3779B97F4A7C15
//   z = state'
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output = z ^ (z >> 31),   uniform = output / 2^64
//
// Parallel streams derive counter-style: stream(seed, i) applies one full
// mix step to seed ^ (i * 0xA5A5A5A5A5A5A5A5) and starts from the result.

#include <cstdint>
#include <utility>

namespace scgrad {

struct Rng {
    std::uint64_t state = 0;
    std::uint64_t draws = 0;  // uniforms consumed so far; replay accounting

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static std::uint64_t avalanche(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static Rng from_seed(std::uint64_t seed) { return stream(seed, 0); }

    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        const std::uint64_t keyed = seed ^ (index * 0xA5A5A5A5A5A5A5A5ULL);
        return Rng{avalanche(keyed + kGamma), 0};
    }

    [[nodiscard]] std::pair<double, Rng> next() const {
        const Rng successor{state + kGamma, draws + 1};
        const std::uint64_t bits = avalanche(successor.state);
        return {static_cast<double>(bits) * 0x1.0p-64, successor};
    }

    bool operator==(const Rng& other) const = default;
};

}  // namespace scgrad
