#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace paewc {

// Deterministic 64-bit generator (splitmix64). Distribution mappings are
// hand-rolled so that streams are bit-reproducible across standard libraries;
// std::uniform_real_distribution and friends are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. Multiply-shift avoids modulo bias.
    int uniform_int(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    // Standard normal via Box-Muller; one fresh pair of uniforms per call
    // keeps the stream position independent of call history.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

private:
    std::uint64_t state_;
};

// FNV-1a, used both for sub-stream derivation tags and file digests.
constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Derives an independent child seed. Disjoint (tag, index) pairs give
// statistically independent streams, which is how train/val/test splits and
// per-epoch shuffles are kept from ever sharing a stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a(tag);
    h ^= seed + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h ^= (index + 1) * 0xD1B54A32D192ED03ULL;
    Rng mix(h);
    return mix.next_u64();
}

}  // namespace paewc
