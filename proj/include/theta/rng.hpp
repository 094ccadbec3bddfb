#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace theta {

// Seeded generator with distribution helpers written out by hand so that
// streams are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be positive.
    std::size_t index(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t r = engine_();
        while (r >= limit) {
            r = engine_();
        }
        return static_cast<std::size_t>(r % bound);
    }

    // Standard normal via Box-Muller; the second variate is discarded.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) {
            u1 = uniform01();
        }
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Independent child stream; used to give each subsystem its own sequence.
    Rng split(std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(stream),
                          static_cast<std::uint32_t>(stream >> 32)};
        std::mt19937_64 child(seq);
        return Rng(child());
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace theta
