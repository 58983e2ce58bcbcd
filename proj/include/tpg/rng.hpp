#pragma once

#include <cmath>
#include <cstdint>

#include "tpg/common.hpp"

namespace tpg {

// Counter-based generator built on splitmix64. Streams are cheap to fork and
// every draw is a pure function of (state index), which keeps all sampling
// reproducible regardless of evaluation order or worker count.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seed splitting: master seed + stage name + item index -> independent seed.
// Stages never consume from each other's streams, so changing one stage's
// internals cannot shift another stage's randomness.
inline uint64_t seed_split(uint64_t master, const std::string& stage, uint64_t index) {
    uint64_t h = fnv1a64(stage);
    uint64_t s = splitmix64(master ^ h);
    return splitmix64(s ^ (0x632be59bd9b4e019ull * (index + 1)));
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dull)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

    // Box-Muller; always consumes exactly two uniforms per draw so the stream
    // layout is independent of call history.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    float normalf() { return static_cast<float>(normal()); }

private:
    uint64_t state_;
};

}  // namespace tpg
