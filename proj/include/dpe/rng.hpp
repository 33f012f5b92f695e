#pragma once

#include <cmath>
#include <cstdint>

namespace dpe {

/// Seed-deterministic random generator (splitmix64 core). The same seed
/// produces the same sequence on every platform, which is what makes
/// dataset generation, weight init and shuffling reproducible.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : state_(seed), has_spare_(false), spare_(0.0) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    /// Standard normal via the Marsaglia polar method (no trig, pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    /// Independent stream derived from this generator's seed and a stream id.
    /// Used for per-sample generation so samples can be produced in any order.
    SeededRng fork(uint64_t stream_id) const {
        return SeededRng(state_ ^ (0xD1B54A32D192ED03ULL * (stream_id + 1)));
    }

private:
    uint64_t state_;
    bool has_spare_;
    double spare_;
};

}  // namespace dpe
