#ifndef PAGESEG_RNG_HPP
#define PAGESEG_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace pageseg {

/// SplitMix64 generator. Used instead of <random> engines so that seeded
/// results are bit-identical across platforms and standard libraries.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in [-amplitude, +amplitude).
    double next_symmetric(double amplitude) {
        return amplitude * (2.0 * next_unit() - 1.0);
    }

    /// Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

private:
    std::uint64_t state_;
};

/// In-place Fisher-Yates shuffle with explicit draws, deterministic per seed.
template <typename T>
void seeded_shuffle(std::vector<T>& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

/// FNV-1a 64-bit hash, used for cache keys and manifest digests.
inline std::uint64_t fnv1a(std::string_view data,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Mixes two seeds into one (order-sensitive).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 rng(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
    return rng.next();
}

} // namespace pageseg

#endif
