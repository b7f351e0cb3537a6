#include "cdbayes/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdbayes/error.hpp"

namespace cdbayes {

double compare_sigma_densities(const TraceStore& full, const TraceStore& reduced, SigmaKind which,
                               std::size_t grid_points) {
  const char* name = which == SigmaKind::Score ? "sigma_score" : "sigma_gamma";
  const auto a = full.pooled(full.require(name));
  const auto b = reduced.pooled(reduced.require(name));
  if (a.size() < kMinDraws || b.size() < kMinDraws)
    throw Error(ErrorKind::InsufficientDraws, std::string("sigma overlap needs at least ") +
                                                  std::to_string(kMinDraws) + " draws per trace");
  if (grid_points < 2) throw Error(ErrorKind::InvalidConfig, "overlap grid needs at least 2 points");

  const double ha = silverman_bandwidth(a);
  const double hb = silverman_bandwidth(b);
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin - 3.0 * ha, *bmin - 3.0 * hb);
  const double hi = std::max(*amax + 3.0 * ha, *bmax + 3.0 * hb);
  std::vector<double> grid(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g)
    grid[g] = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1);

  auto fa = kernel_density(a, ha, grid);
  auto fb = kernel_density(b, hb, grid);
  for (auto* f : {&fa, &fb}) {
    const double area = trapezoid(grid, *f);
    if (area > 0.0)
      for (auto& v : *f) v /= area;
  }
  std::vector<double> lower(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) lower[g] = std::min(fa[g], fb[g]);
  return std::clamp(trapezoid(grid, lower), 0.0, 1.0);
}

std::optional<std::string> removal_candidate(const std::vector<std::string>& terms,
                                             const std::vector<ParameterSummary>& summaries) {
  std::optional<std::string> best;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (const auto& term : terms) {
    if (term == "intercept") continue;
    const auto& s = find_summary(summaries, term);
    if (s.significant) continue;
    const bool parent_of_retained = std::any_of(terms.begin(), terms.end(), [&](const std::string& other) {
      const auto parents = term_parents(other);
      return std::find(parents.begin(), parents.end(), term) != parents.end();
    });
    if (parent_of_retained) continue;
    double ratio = 0.0;
    if (s.sd > 0.0) ratio = std::abs(s.median) / s.sd;
    else if (s.median != 0.0) ratio = std::numeric_limits<double>::infinity();
    // <= so that a later term wins an exact tie.
    if (!best || ratio <= best_ratio) {
      best = term;
      best_ratio = ratio;
    }
  }
  return best;
}

SelectionResult backward_select(const PanelDataset& data, const CovariateSpec& full_spec, const PriorConfig& prior,
                                const SamplerConfig& sampler, std::size_t workers) {
  if (std::find(full_spec.terms.begin(), full_spec.terms.end(), "intercept") == full_spec.terms.end())
    throw Error(ErrorKind::InvalidConfig, "backward selection needs an intercept in the full model");

  SelectionResult result;
  CovariateSpec spec = full_spec;
  std::optional<TraceStore> full_trace;
  std::optional<TraceStore> previous;

  for (std::size_t step = 0;; ++step) {
    const auto model = ModelDefinition::from_panel(data, spec, prior);
    SamplerConfig config = sampler;
    config.seed = sampler.seed + step;
    config.keep_gamma = false;
    TraceStore trace = run_chains(model, config, workers);

    SelectionStep record;
    record.step = step;
    record.seed = config.seed;
    record.terms = model.design().columns;
    record.summaries = summarize(trace);
    if (previous)
      record.overlap = SigmaOverlap{compare_sigma_densities(*previous, trace, SigmaKind::Score),
                                    compare_sigma_densities(*previous, trace, SigmaKind::Gamma)};
    record.removed = removal_candidate(record.terms, record.summaries);
    const bool done = !record.removed;
    if (!done) {
      auto& terms = spec.terms;
      terms.erase(std::find(terms.begin(), terms.end(), *record.removed));
    }
    result.history.push_back(std::move(record));

    if (!full_trace) full_trace = trace;
    if (done) {
      if (step > 0)
        result.full_vs_final = SigmaOverlap{compare_sigma_densities(*full_trace, trace, SigmaKind::Score),
                                            compare_sigma_densities(*full_trace, trace, SigmaKind::Gamma)};
      break;
    }
    previous = std::move(trace);
  }
  result.final_spec = spec;
  return result;
}

}  // namespace cdbayes
