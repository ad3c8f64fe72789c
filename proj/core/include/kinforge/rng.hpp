#ifndef KINFORGE_RNG_HPP
#define KINFORGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace kinforge {

/// Deterministic random source. Wraps std::mt19937_64 (whose output stream
/// is pinned by the standard) and implements its own variate transforms so
/// results do not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        const int v = static_cast<int>(uniform01() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (fresh pair each call, no cached spare).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derives an independent child stream; (seed, stream) -> child seed is a
    /// fixed SplitMix64-style hash, so streams are reconstructible.
    Rng child(std::uint64_t stream) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z = z ^ (z >> 31);
        return Rng(z);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace kinforge

#endif
