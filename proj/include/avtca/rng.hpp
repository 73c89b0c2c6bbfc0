#pragma once

#include <cmath>
#include <cstdint>

namespace avtca {

// Counter-based generator: the value stream is a pure function of
// (seed, counter), so any consumer can be replayed bit-exactly by
// restoring those two fields. splitmix64 finalizer.
struct RngState {
    uint64_t seed = 0;
    uint64_t counter = 0;

    explicit RngState(uint64_t seed_ = 0, uint64_t counter_ = 0)
        : seed(seed_), counter(counter_) {}

    uint64_t next_u64() {
        uint64_t z = seed + (++counter) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two stream values per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Derive an independent stream (for per-epoch shuffles etc.).
    static RngState derive(uint64_t seed, uint64_t stream) {
        RngState mix(seed ^ 0xD1B54A32D192ED03ull, stream);
        uint64_t s = mix.next_u64();
        return RngState(s, 0);
    }
};

}  // namespace avtca
