#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cdbayes/sampler.hpp"

namespace cdbayes {

inline constexpr std::size_t kMinDraws = 100;

/// Linear interpolation between order statistics (R type 7):
/// h = (n - 1) p, q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
/// `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::span<const double> draws, double p);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double v) const { return lower <= v && v <= upper; }
  double width() const { return upper - lower; }
};

enum class IntervalKind { Central, Hpd };

Interval central_interval(std::span<const double> draws, double level = 0.95);
// Shortest interval covering ceil(level * n) order statistics.
Interval hpd_interval(std::span<const double> draws, double level = 0.95);

double sample_mean(std::span<const double> draws);
double sample_sd(std::span<const double> draws);

/// Effective sample size from Geyer's initial monotone positive sequence of
/// autocorrelation pair sums. Capped at the number of draws.
double ess(std::span<const double> draws);

/// Spectral density at frequency zero from an AR(p) fit (Yule-Walker,
/// order by AIC). Variance of the sample mean is this value divided by n.
double spectral_density_zero(std::span<const double> draws);

/// Geweke z comparing the means of the first `first` and last `last`
/// fractions of a chain.
double geweke(std::span<const double> draws, double first = 0.1, double last = 0.5);

/// Split R-hat: each chain is halved, then the pooled/within variance ratio
/// of the 2C halves is returned.
double split_rhat(const std::vector<std::vector<double>>& chains);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

double silverman_bandwidth(std::span<const double> draws);

/// Gaussian-kernel density evaluated at `grid`, unnormalized on the grid.
std::vector<double> kernel_density(std::span<const double> draws, double bandwidth, std::span<const double> grid);

/// Gaussian KDE on `grid_points` equally spaced points over
/// [min - 3h, max + 3h], Silverman bandwidth. The curve is rescaled so its
/// trapezoid integral over the grid is exactly 1.
DensityCurve kde(std::span<const double> draws, std::size_t grid_points = 512);

double trapezoid(std::span<const double> x, std::span<const double> y);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  Interval interval;
  double ess = 0.0;
  std::vector<double> geweke_z;  // per chain
  double rhat = 1.0;
  bool significant = false;      // interval excludes zero
};

ParameterSummary summarize_draws(const std::string& name, const std::vector<std::vector<double>>& chains,
                                 IntervalKind kind = IntervalKind::Central, double level = 0.95);

/// Summaries for every trace column, in trace order.
std::vector<ParameterSummary> summarize(const TraceStore& trace, IntervalKind kind = IntervalKind::Central,
                                        double level = 0.95);

const ParameterSummary& find_summary(const std::vector<ParameterSummary>& summaries, std::string_view name);

}  // namespace cdbayes
