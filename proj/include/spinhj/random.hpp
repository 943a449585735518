#pragma once

// Seed derivation and Monte Carlo accumulation.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace spinhj {

/// SplitMix64 finalizer; used as a counter-based splitter so that every
/// (seed, stream) pair maps to an independent-looking engine seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

/// Result of a Monte Carlo estimator.
struct McEstimate {
    double mean = 0.0;
    double stderr = std::numeric_limits<double>::infinity();
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

/// Welford running mean/variance. Identical inputs leave the variance at
/// exactly zero.
class RunningStats {
public:
    void add(double x) noexcept {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return mean_; }

    double variance() const noexcept {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : std::numeric_limits<double>::infinity();
    }

    double stderr() const noexcept {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_))
                      : std::numeric_limits<double>::infinity();
    }

    McEstimate estimate(std::uint64_t seed) const noexcept { return {mean(), stderr(), n_, seed}; }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

}  // namespace spinhj
