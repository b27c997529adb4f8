#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace vidrel {

// Thrown for malformed inputs: bad files, bad configs, violated invariants.
// The CLI maps this to exit code 1; everything else is a runtime failure (2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic PRNG (splitmix64). The standard <random> distributions are
// implementation-defined, so every stochastic component in the project draws
// from this generator to keep outputs reproducible across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive on both ends.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    double normal() {
        double u1 = 0.0;
        while (u1 <= 1e-12) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Independent child stream; deterministic in (parent seed, key).
    Rng fork(uint64_t key) const {
        Rng mixer(state_ ^ (key * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        return Rng(mixer.next_u64());
    }

private:
    uint64_t state_;
};

// FNV-1a, used for input digests in run manifests.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace vidrel
