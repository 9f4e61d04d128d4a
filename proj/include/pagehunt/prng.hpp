#pragma once

#include <cmath>
#include <cstdint>

namespace pagehunt {

// Simulated time in microseconds. Reports and configs use milliseconds;
// the engine keeps integer microseconds so sub-millisecond critical
// windows and detection delays stay exact.
using TimeUs = std::int64_t;

constexpr TimeUs kUsPerMs = 1000;

constexpr TimeUs ms_to_us(double ms) {
    return static_cast<TimeUs>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5));
}

constexpr double us_to_ms(TimeUs us) { return static_cast<double>(us) / 1000.0; }
constexpr double us_to_s(TimeUs us) { return static_cast<double>(us) / 1e6; }

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless finalizer; used to derive independent seeds and as the
// page-content PRF.
inline std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t s = x;
    return splitmix64_next(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ 0x6a09e667f3bcc909ULL ^ mix64(stream));
}

// Small deterministic PRNG (splitmix64 stream). Every random draw in the
// artifact flows through one of these, keyed by an explicit seed, so runs
// are reproducible across platforms.
class Rng {
  public:
    Rng() : state_(0) {}
    explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x243f6a8885a308d3ULL)) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform in [0, bound). Multiply-shift; bias is < bound / 2^64.
    std::uint64_t bounded(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    // Uniform in [0, 1).
    double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential with the given mean (> 0).
    double exponential(double mean) { return -mean * std::log(1.0 - real()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

    // Triangular distribution; min <= mode <= max. Degenerates to a
    // constant when min == max.
    double triangular(double min, double mode, double max) {
        if (max <= min) return mode;
        const double u = real();
        const double fc = (mode - min) / (max - min);
        if (u < fc) return min + std::sqrt(u * (max - min) * (mode - min));
        return max - std::sqrt((1.0 - u) * (max - min) * (max - mode));
    }

  private:
    std::uint64_t state_;
};

}  // namespace pagehunt
