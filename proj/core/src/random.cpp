#include "confdrift/random.hpp"

#include <cmath>

namespace confdrift {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept {
    SplitMix64 mix(base ^ 0x5851f42d4c957f2dULL);
    std::uint64_t h = mix();
    for (std::uint64_t step : path) {
        SplitMix64 next(h ^ (step * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
        h = next();
    }
    return h;
}

double standard_normal(SplitMix64& rng) noexcept {
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * rng.uniform() - 1.0;
        v = 2.0 * rng.uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

}  // namespace confdrift
