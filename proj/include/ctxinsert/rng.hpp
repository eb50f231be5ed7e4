#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ctxinsert {

// SplitMix64 finalizer; used to decorrelate derived seeds.
uint64_t mix_seed(uint64_t value);

// Seeded random source with explicit output mappings. std::mt19937_64 has a
// standard-mandated bit sequence, but the std distributions do not, so the
// uniform/normal/index mappings are implemented here to keep generated data
// byte-identical across standard libraries.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : engine_(seed), seed_value_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (cosine branch only, no cached spare).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased uniform index in [0, n); n must be positive.
    size_t index(size_t n);

    // Independent child stream derived from this stream's seed and a key.
    SeededRng fork(uint64_t key) const {
        return SeededRng(mix_seed(seed_value_ ^ mix_seed(key)));
    }

    uint64_t seed() const { return seed_value_; }

private:
    std::mt19937_64 engine_;
    uint64_t seed_value_ = 0;
};

}  // namespace ctxinsert
