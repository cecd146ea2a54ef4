#pragma once

#include <cmath>
#include <cstdint>

namespace cowpro {

// splitmix64 mixing step. Also used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic generator with a fully specified algorithm so that results
// are identical across platforms and standard library versions. The standard
// <random> distributions are implementation-defined and must not be used
// anywhere determinism matters.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 bits of mantissa.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::int64_t randint(std::int64_t n) {
        return static_cast<std::int64_t>(uniform01() * static_cast<double>(n));
    }

    // Box-Muller, one value per call (the pair's second half is discarded to
    // keep the stream position independent of call parity).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Derived stream, independent of this one's future output.
    Rng fork(std::uint64_t label) const { return Rng(mix64(state_ ^ mix64(label))); }

private:
    std::uint64_t state_;
};

}  // namespace cowpro
