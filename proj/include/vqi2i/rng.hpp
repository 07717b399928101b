#pragma once

#include <cstdint>
#include <string_view>

namespace vqi2i {

// Counter-based 64-bit generator (splitmix64 over an incrementing counter).
// Integer state only, so sequences are bitwise reproducible across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n); n must be positive.
    uint64_t next_below(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t limit = n * (UINT64_MAX / n);
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller on fixed draws.
    double normal();

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream from (seed, tag, index), used so that data
// order, parameter init, and sampling never share a stream.
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index);

}  // namespace vqi2i
