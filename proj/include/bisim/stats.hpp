#pragma once

#include <cmath>
#include <cstdint>

#include "bisim/rng.hpp"

namespace bisim {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Mean of |Z| for Z ~ N(mean, variance) (folded-normal mean).
/// Degenerates to |mean| when the variance is zero.
inline double folded_normal_mean(double mean, double variance) {
    if (variance <= 0.0) return std::abs(mean);
    const double sd = std::sqrt(variance);
    return sd * std::sqrt(2.0 / M_PI) * std::exp(-mean * mean / (2.0 * variance)) +
           mean * (1.0 - 2.0 * normal_cdf(-mean / sd));
}

/// Monte-Carlo estimate of E|Z|, Z ~ N(mean, variance). Cross-check for the
/// closed form; draws one normal per sample from a fresh seeded stream.
inline double folded_normal_mean_mc(double mean, double variance, std::int64_t n_samples,
                                    std::uint64_t seed) {
    Rng rng(seed);
    const double sd = variance > 0.0 ? std::sqrt(variance) : 0.0;
    double acc = 0.0;
    for (std::int64_t i = 0; i < n_samples; ++i) acc += std::abs(mean + sd * rng.normal());
    return acc / static_cast<double>(n_samples);
}

inline double sqr(double x) { return x * x; }

} // namespace bisim
