#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qn {

// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ stream);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix64(derive_seed(seed, a) ^ mix64(b + 0x55AA55AA55AA55AAULL));
}

// mt19937 with hand-rolled distributions. std:: distributions are
// implementation-defined; these produce the same sequence on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(static_cast<std::uint32_t>(mix64(seed))) {}

    std::uint32_t next_u32() { return eng_(); }

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform() { return static_cast<float>(eng_() >> 8) * (1.0f / 16777216.0f); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint32_t span = static_cast<std::uint32_t>(hi - lo) + 1u;
        return lo + static_cast<int>(eng_() % span);
    }

    bool bernoulli(float p) { return uniform() < p; }

    // Box-Muller; consumes two uniforms per pair, caches the second.
    float normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        float u1 = uniform();
        float u2 = uniform();
        if (u1 < 1e-12f) u1 = 1e-12f;
        const float r = std::sqrt(-2.0f * std::log(u1));
        const float theta = 6.28318530717958647692f * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    float normal(float mean, float stddev) { return mean + stddev * normal(); }

private:
    std::mt19937 eng_;
    bool has_spare_ = false;
    float spare_ = 0.0f;
};

}  // namespace qn
