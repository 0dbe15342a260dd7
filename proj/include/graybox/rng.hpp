#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace graybox {

/// splitmix64 mixing step.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives a child seed from a base seed and a path of indices. Distinct
/// paths give statistically independent streams, which is how per-split and
/// per-sample streams stay decoupled.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

/// Deterministic random stream. Distributions are built directly on the raw
/// engine output (not std:: distributions) so that draws are identical across
/// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01();

    /// Uniform in [lo, hi].
    double uniform(double lo, double hi);

    /// Normal draw via Box-Muller; consumes exactly two engine outputs.
    double normal(double mean, double stddev);

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace graybox
