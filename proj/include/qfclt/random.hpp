#pragma once

#include <cstdint>
#include <random>

namespace qfclt {

/// Task kinds used to derive child streams from a master seed. Adding a new
/// kind never perturbs the streams of the existing ones.
enum class StreamKind : std::uint64_t {
    sampling = 1,
    edgeworth_measure = 2,
    edgeworth_fourier = 3,
    condition_check = 4,
    concentration_shift = 5,
    random_instance = 6,
    lattice_instance = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded 64-bit Mersenne twister with deterministic child derivation.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    RandomStream child(StreamKind kind, std::uint64_t index) const {
        std::uint64_t h = splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(kind) * 0x100000001b3ULL));
        h = splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
        return RandomStream(h);
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
    }
    std::uint64_t bits() { return engine_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qfclt
