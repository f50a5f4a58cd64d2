#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace aird {

// Counter-based 64-bit generator (splitmix64 walk). Draw i is a pure function
// of (seed, i), so streams can be forked for parallel Monte Carlo and results
// do not depend on worker count. The integer stream is exactly reproducible
// everywhere; Gaussian draws additionally go through libm sqrt/log/cos.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return mix(seed_ + (++ctr_) * kGamma); }

    // Uniform in [0, 1), 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (one value per pair of uniforms; the sin
    // partner is discarded to keep the stream position a simple counter).
    double next_gaussian() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n). Rejection-free modulo is fine at 64-bit
    // counter quality for the dataset sizes used here, but keep it unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x < limit || limit == 0) return x % n;
        }
    }

    // Independent child stream keyed by `key`; does not advance this stream.
    Rng fork(std::uint64_t key) const {
        return Rng(mix(seed_ ^ mix(key + kGamma)));
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t ctr_ = 0;
};

}  // namespace aird
