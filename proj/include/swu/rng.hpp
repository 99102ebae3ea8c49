#pragma once
// Deterministic, platform-independent RNG. All randomness in the project
// flows through this generator so outputs are byte-stable across runs.

#include <cstdint>
#include <cmath>

namespace swu {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Mixes an arbitrary list of words into one seed (domain separation).
inline uint64_t mix_seed(std::initializer_list<uint64_t> words) {
    uint64_t s = 0x243F6A8885A308D3ULL;
    for (uint64_t w : words) {
        s ^= w + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2);
        splitmix64(s);
    }
    return s;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // Warm up so nearby seeds decorrelate.
        splitmix64(state_);
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) {
        // Modulo bias is negligible for n << 2^64 and keeps the stream simple.
        return n ? next_u64() % n : 0;
    }

    // Standard normal via Box-Muller (uses both values).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace swu
