#pragma once

#include <cmath>
#include <cstdint>

namespace isoscatter {

// SplitMix64 step (Steele/Lea/Flood). `state` is the counter, the return
// value is the avalanched output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Seed of the substream `index` under `master`. Computed as
// splitmix64(splitmix64(master) + index): distinct indices map to distinct,
// fully avalanched seeds, so consecutive sample indices give decorrelated
// streams. This mapping is part of the reproducibility contract: sample i of
// an ensemble depends only on (master seed, i), never on the worker layout.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t state = master;
    std::uint64_t whitened = splitmix64(state);
    std::uint64_t counter = whitened + index;
    return splitmix64(counter);
}

// xoshiro256++ (Blackman & Vigna). Chosen over std::mt19937_64 so that the
// byte-for-byte output contract does not depend on the standard library's
// distribution implementations.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

// One deterministic random substream. Ensemble code constructs
// RngStream(seed, sample_index) per sample; single-draw operations take a
// stream by reference and consume it in a fixed order.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
        : engine_(derive_stream_seed(master_seed, stream_index)) {}

    explicit RngStream(std::uint64_t raw_seed) : engine_(raw_seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via the Marsaglia polar method; the second variate of
    // each pair is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

private:
    Xoshiro256pp engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace isoscatter
