#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace gram {

// Deterministic, platform-independent RNG. std:: distributions are
// implementation-defined, so all sampling is done by hand on top of
// splitmix64: identical seeds give identical streams on every build.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Box-Muller; one draw per call, the paired value is discarded so the
    // stream stays one-uniform-pair-per-sample and easy to reason about.
    double normal(double mean, double stddev) {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
};

inline uint64_t hash_string(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Independent stream per (seed, name). Parameter init uses this so that the
// values of a named parameter do not depend on registration order.
inline Rng named_rng(uint64_t seed, const std::string& name) {
    uint64_t h = hash_string(name);
    Rng mix(seed ^ (h + 0x9e3779b97f4a7c15ULL));
    mix.next_u64();
    return mix;
}

}  // namespace gram
