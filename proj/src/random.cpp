#include "cdbayes/random.hpp"

#include <cmath>
#include <limits>

#include <boost/random/normal_distribution.hpp>

namespace cdbayes {

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream) {
  return mix64(root + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

Rng make_stream(std::uint64_t root, std::uint64_t stream) {
  return Rng(stream_seed(root, stream));
}

double draw_normal(Rng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_normal(Rng& rng, double mean, double sd) { return mean + sd * draw_normal(rng); }

double draw_uniform(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_exponential(Rng& rng) { return -std::log(draw_uniform(rng)); }

namespace {

// Marsaglia & Tsang, shape >= 1, unit rate.
double gamma_mt(Rng& rng, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = draw_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = draw_uniform(rng);
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace

double draw_gamma(Rng& rng, double shape, double rate) {
  if (shape >= 1.0) return gamma_mt(rng, shape) / rate;
  // G(a) = G(a + 1) * U^(1/a)
  const double log_draw =
      std::log(gamma_mt(rng, shape + 1.0)) + std::log(draw_uniform(rng)) / shape - std::log(rate);
  const double v = std::exp(log_draw);
  return v > 0.0 ? v : std::numeric_limits<double>::min();
}

}  // namespace cdbayes
