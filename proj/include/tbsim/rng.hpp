// rng.hpp
// Counter-based random streams for reproducible, partitionable Monte Carlo.
//
// One root seed is expanded into independent sub-streams keyed by
// (cycle index, purpose). Every stream is a splitmix64 counter sequence, so
// a batch simulated on any thread produces exactly the same draws as the
// serial run. No global state, no std::random engine dependence.

#pragma once

#include <cmath>
#include <cstdint>

namespace tbsim {

namespace detail {
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derive an independent stream key from a root seed and two stream labels.
inline uint64_t derive_stream_key(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t k = detail::mix64(seed + 0x9E3779B97F4A7C15ULL);
    k = detail::mix64(k ^ (a + 0xD1B54A32D192ED03ULL));
    k = detail::mix64(k ^ (b + 0x8CB92BA72F3D8DD7ULL));
    return k;
}

class Rng {
public:
    explicit Rng(uint64_t key) : state_(key) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1], safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller; second value cached.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Exponential inter-arrival time for the given rate (> 0).
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace tbsim
