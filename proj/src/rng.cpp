#include "vqi2i/rng.hpp"

#include <cmath>

namespace vqi2i {

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 is nudged away from 0 so log() stays finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

namespace {

// One splitmix64 mixing round over a raw value.
uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index) {
    // FNV-1a over the tag bytes keeps distinct stream names apart even when
    // the base seed and index collide.
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : tag) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    uint64_t z = mix64(seed + 0x9e3779b97f4a7c15ull);
    z = mix64(z ^ h);
    z = mix64(z ^ index);
    return z;
}

}  // namespace vqi2i
