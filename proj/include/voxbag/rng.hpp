#ifndef VOXBAG_RNG_HPP_
#define VOXBAG_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace voxbag {

/// Small deterministic PRNG (splitmix64 core). Self-contained so that
/// sequences are identical across platforms and standard libraries.
/// Child streams come from derive(stream_id), a pure function of the
/// seed and the id; per-stream work is therefore order-independent.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)), seed_state_(state_) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Unbiased integer in [0, n), n >= 1.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (two uniform draws per value).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    /// Child stream for the given id, independent of draws made so far.
    Rng derive(std::uint64_t stream_id) const {
        Rng child(0);
        child.state_ = mix(seed_state_ ^ mix(stream_id + 0x632be59bd9b4e019ULL));
        child.seed_state_ = child.state_;
        return child;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    std::uint64_t seed_state_;
};

}  // namespace voxbag

#endif  // VOXBAG_RNG_HPP_
