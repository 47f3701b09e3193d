#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace shmpipe {

// All seeded operations in this library draw from SplitMix64 so that splits,
// undersampling and bootstraps replay bit-identically on any platform.
// Constants (Steele, Lea & Flood 2014):
//   increment 0x9E3779B97F4A7C15
//   mix       z ^= z>>30; z *= 0xBF58476D1CE4E5B9; z ^= z>>27;
//             z *= 0x94D049BB133111EB; z ^= z>>31
inline constexpr std::uint64_t kSplitMixIncrement = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derives an independent sub-seed for stream `stream` of a run seeded with
/// `seed`. Used so one --seed reproduces every stochastic step of a run.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed + (stream + 1) * kSplitMixIncrement);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() { return mix64(state_ += kSplitMixIncrement); }

    /// Uniform integer in [0, bound). bound must be nonzero. The modulo bias
    /// is irrelevant at the bounds used here and keeps the stream portable.
    constexpr std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// In-place Fisher-Yates shuffle driven by `rng`.
template <class T>
void shuffle(std::span<T> values, SplitMix64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(values[i - 1], values[j]);
    }
}

} // namespace shmpipe
