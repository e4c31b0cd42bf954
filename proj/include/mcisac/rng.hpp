#pragma once

#include <cstdint>
#include <random>

#include "complex_matrix.hpp"

namespace mcisac {

/// splitmix64 step; used to derive independent substream seeds so that
/// (seed, stream-index) pairs map to well-separated generator states.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream * 0xda942042e4dd58b5ULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

/// Deterministic random source. All stochastic code in the library draws
/// through this wrapper so results are reproducible from a single seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double gaussian() { return normal_(eng_); }

    /// Circularly symmetric complex gaussian with E|x|^2 = var.
    cxd cgaussian(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        return {s * gaussian(), s * gaussian()};
    }

    CVector cgaussian_vector(std::size_t n, double var = 1.0) {
        CVector v(n);
        for (cxd& x : v) x = cgaussian(var);
        return v;
    }

    double uniform() { return uni_(eng_); }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uni_{0.0, 1.0};
};

}  // namespace mcisac
