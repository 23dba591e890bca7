#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <utility>
#include <vector>

namespace confdrift {

/// SplitMix64 generator. Small state (8 bytes) so that very large particle
/// populations can each own an independent stream.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// Uniform index in [0, n); n must be positive.
inline std::size_t uniform_index(SplitMix64& rng, std::size_t n) noexcept {
    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
}

/// Fisher-Yates shuffle with a fixed draw order, so results match across
/// standard library implementations.
template <typename T>
void shuffle_in_place(std::vector<T>& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[uniform_index(rng, i)]);
    }
}

/// Mixes a base seed with a path of indices into an independent sub-seed.
/// Used everywhere a parallel task needs its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

/// Standard normal draw (Marsaglia polar method, no cached second value so
/// copying a generator never duplicates pending state).
double standard_normal(SplitMix64& rng) noexcept;

}  // namespace confdrift
