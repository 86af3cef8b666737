#pragma once

#include <cstdint>

namespace splinth {

/// SplitMix64 stream keyed by (seed, stream index). Samplers are written out here rather than
/// taken from <random> so draws are identical across standard libraries.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next();
    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Gamma with the given shape and unit scale (Marsaglia–Tsang).
    double gamma(double shape);
    bool bernoulli(double p);
    /// ±1 with equal probability.
    double rademacher();

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stateless 64-bit mix of (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace splinth
