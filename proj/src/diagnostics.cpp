#include "cdbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdbayes/error.hpp"

namespace cdbayes {

namespace {

void require_draws(std::size_t n, std::size_t needed, const char* what) {
  if (n < needed)
    throw Error(ErrorKind::InsufficientDraws, std::string(what) + " needs at least " + std::to_string(needed) +
                                                  " draws, got " + std::to_string(n));
}

std::vector<double> sorted_copy(std::span<const double> draws) {
  std::vector<double> s(draws.begin(), draws.end());
  std::sort(s.begin(), s.end());
  return s;
}

// Biased (divide-by-n) autocovariances up to and including max_lag.
std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag) {
  const auto n = x.size();
  const double mean = sample_mean(x);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - mean;
  max_lag = std::min(max_lag, n - 1);
  std::vector<double> acov(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    acov[lag] = s / static_cast<double>(n);
  }
  return acov;
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InsufficientDraws, "quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> draws, double p) {
  auto s = sorted_copy(draws);
  return quantile_sorted(s, p);
}

Interval central_interval(std::span<const double> draws, double level) {
  auto s = sorted_copy(draws);
  const double tail = 0.5 * (1.0 - level);
  return {quantile_sorted(s, tail), quantile_sorted(s, 1.0 - tail)};
}

Interval hpd_interval(std::span<const double> draws, double level) {
  auto s = sorted_copy(draws);
  if (s.empty()) throw Error(ErrorKind::InsufficientDraws, "HPD interval of an empty sample");
  const auto n = s.size();
  const auto cover = std::min(n, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n))));
  if (cover <= 1) return {s.front(), s.front()};
  std::size_t best = 0;
  double best_width = s[cover - 1] - s[0];
  for (std::size_t i = 1; i + cover <= n; ++i) {
    const double w = s[i + cover - 1] - s[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {s[best], s[best + cover - 1]};
}

double sample_mean(std::span<const double> draws) {
  if (draws.empty()) return 0.0;
  return std::accumulate(draws.begin(), draws.end(), 0.0) / static_cast<double>(draws.size());
}

double sample_sd(std::span<const double> draws) {
  if (draws.size() < 2) return 0.0;
  const double mean = sample_mean(draws);
  double ss = 0.0;
  for (double v : draws) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(draws.size() - 1));
}

namespace {

double ess_impl(std::span<const double> x) {
  const auto n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = sample_mean(x);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - mean;
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n);
  };
  const double var0 = acov(0);
  if (var0 <= 0.0) return static_cast<double>(n);

  double sum = 0.0;  // sum of monotone pair sums
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = (acov(2 * m) + acov(2 * m + 1)) / var0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

}  // namespace

double ess(std::span<const double> draws) {
  require_draws(draws.size(), kMinDraws, "ess");
  return ess_impl(draws);
}

double spectral_density_zero(std::span<const double> x) {
  const auto n = x.size();
  if (n < 3) return 0.0;
  const auto max_order = std::min<std::size_t>(n - 2, static_cast<std::size_t>(10.0 * std::log10(static_cast<double>(n))));
  const auto r = autocovariance(x, max_order);
  if (r[0] <= 0.0) return 0.0;

  // Levinson-Durbin recursion, keeping the AIC-best order.
  std::vector<double> phi;
  double err = r[0];
  double best_aic = static_cast<double>(n) * std::log(err);
  double best_s0 = err;
  for (std::size_t k = 1; k <= max_order; ++k) {
    double acc = r[k];
    for (std::size_t j = 0; j + 1 < k; ++j) acc -= phi[j] * r[k - 1 - j];
    const double reflection = acc / err;
    std::vector<double> next(k);
    for (std::size_t j = 0; j + 1 < k; ++j) next[j] = phi[j] - reflection * phi[k - 2 - j];
    next[k - 1] = reflection;
    phi = std::move(next);
    err *= (1.0 - reflection * reflection);
    if (err <= 0.0) break;
    const double aic = static_cast<double>(n) * std::log(err) + 2.0 * static_cast<double>(k);
    if (aic < best_aic) {
      best_aic = aic;
      const double denom = 1.0 - std::accumulate(phi.begin(), phi.end(), 0.0);
      best_s0 = err / (denom * denom);
    }
  }
  return best_s0;
}

double geweke(std::span<const double> draws, double first, double last) {
  require_draws(draws.size(), kMinDraws, "geweke");
  if (!(first > 0.0 && last > 0.0 && first + last <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "geweke window fractions must be positive and sum to <= 1");
  const auto n = draws.size();
  const auto n1 = static_cast<std::size_t>(std::floor(first * static_cast<double>(n)));
  const auto n2 = static_cast<std::size_t>(std::floor(last * static_cast<double>(n)));
  auto a = draws.subspan(0, n1);
  auto b = draws.subspan(n - n2, n2);
  const double var = spectral_density_zero(a) / static_cast<double>(n1) +
                     spectral_density_zero(b) / static_cast<double>(n2);
  const double diff = sample_mean(a) - sample_mean(b);
  if (var <= 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
  return diff / std::sqrt(var);
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw Error(ErrorKind::InsufficientDraws, "split R-hat needs at least one chain");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  const std::size_t half = n / 2;
  if (half < 2) throw Error(ErrorKind::InsufficientDraws, "split R-hat needs at least 4 draws per chain");

  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    // Odd-length chains drop their middle draw.
    std::span<const double> s(c.data(), n);
    for (auto part : {s.subspan(0, half), s.subspan(n - half, half)}) {
      means.push_back(sample_mean(part));
      const double sd = sample_sd(part);
      vars.push_back(sd * sd);
    }
  }
  const double w = sample_mean(vars);
  const double mean_sd = sample_sd(means);
  const double b_over_n = mean_sd * mean_sd;
  if (w <= 0.0) return b_over_n <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double h = static_cast<double>(half);
  const double var_plus = (h - 1.0) / h * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double silverman_bandwidth(std::span<const double> draws) {
  auto s = sorted_copy(draws);
  const double sd = sample_sd(draws);
  const double iqr = quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (spread <= 0.0) spread = std::max(sd, iqr / 1.34);
  if (spread <= 0.0) spread = 1e-6 * std::max(1.0, std::abs(s.front()));
  return 0.9 * spread * std::pow(static_cast<double>(draws.size()), -0.2);
}

std::vector<double> kernel_density(std::span<const double> draws, double h, std::span<const double> grid) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  auto s = sorted_copy(draws);
  const double norm = inv_sqrt_2pi / (h * static_cast<double>(s.size()));
  const double cutoff = 8.0 * h;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    auto lo = std::lower_bound(s.begin(), s.end(), x - cutoff);
    auto hi = std::upper_bound(lo, s.end(), x + cutoff);
    double acc = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (x - *it) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
  return out;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

DensityCurve kde(std::span<const double> draws, std::size_t grid_points) {
  require_draws(draws.size(), kMinDraws, "kde");
  if (grid_points < 2) throw Error(ErrorKind::InvalidConfig, "kde grid needs at least 2 points");
  DensityCurve curve;
  curve.bandwidth = silverman_bandwidth(draws);
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  const double lo = *lo_it - 3.0 * curve.bandwidth;
  const double hi = *hi_it + 3.0 * curve.bandwidth;
  curve.grid.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g)
    curve.grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
  curve.density = kernel_density(draws, curve.bandwidth, curve.grid);
  const double area = trapezoid(curve.grid, curve.density);
  if (area > 0.0)
    for (auto& d : curve.density) d /= area;
  return curve;
}

ParameterSummary summarize_draws(const std::string& name, const std::vector<std::vector<double>>& chains,
                                 IntervalKind kind, double level) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  require_draws(pooled.size(), kMinDraws, "summarize");

  ParameterSummary s;
  s.name = name;
  auto sorted = sorted_copy(pooled);
  s.mean = sample_mean(pooled);
  s.median = quantile_sorted(sorted, 0.5);
  s.sd = sample_sd(pooled);
  s.interval = kind == IntervalKind::Central ? central_interval(pooled, level) : hpd_interval(pooled, level);
  s.significant = s.interval.lower > 0.0 || s.interval.upper < 0.0;
  for (const auto& c : chains) {
    s.ess += ess_impl(c);
    s.geweke_z.push_back(c.size() >= kMinDraws ? geweke(c) : std::numeric_limits<double>::quiet_NaN());
  }
  s.ess = std::min(s.ess, static_cast<double>(pooled.size()));
  s.rhat = split_rhat(chains);
  return s;
}

std::vector<ParameterSummary> summarize(const TraceStore& trace, IntervalKind kind, double level) {
  require_draws(trace.total_draws(), kMinDraws, "summarize");
  std::vector<ParameterSummary> out;
  out.reserve(trace.names.size());
  for (std::size_t p = 0; p < trace.names.size(); ++p)
    out.push_back(summarize_draws(trace.names[p], trace.columns(p), kind, level));
  return out;
}

const ParameterSummary& find_summary(const std::vector<ParameterSummary>& summaries, std::string_view name) {
  for (const auto& s : summaries)
    if (s.name == name) return s;
  throw Error(ErrorKind::SpecMismatch, "no summary for parameter '" + std::string(name) + "'");
}

}  // namespace cdbayes
