#pragma once

#include <cstdint>
#include <random>

namespace cdbayes {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Independent stream for (root seed, stream index). Chains, replications
// and selection steps all derive their engines through this function:
//   stream_seed(s, k) = mix64(s + 0x9E3779B97F4A7C15 * (k + 1))
std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream);
Rng make_stream(std::uint64_t root, std::uint64_t stream);

double draw_normal(Rng& rng);
double draw_normal(Rng& rng, double mean, double sd);
// Open interval (0, 1).
double draw_uniform(Rng& rng);
double draw_exponential(Rng& rng);
// Gamma(shape, rate); shape < 1 handled in log space so tiny shapes do not
// underflow to exactly zero.
double draw_gamma(Rng& rng, double shape, double rate);

}  // namespace cdbayes
