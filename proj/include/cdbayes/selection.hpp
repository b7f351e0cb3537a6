#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cdbayes/diagnostics.hpp"
#include "cdbayes/model.hpp"
#include "cdbayes/sampler.hpp"
#include "cdbayes/trial_data.hpp"

namespace cdbayes {

/// Overlap coefficient of the two posterior sigma densities: the trapezoid
/// integral of min(f_full, f_reduced) on a shared grid, each density a
/// Silverman-bandwidth Gaussian KDE normalized on that grid.
double compare_sigma_densities(const TraceStore& full, const TraceStore& reduced, SigmaKind which,
                               std::size_t grid_points = 2048);

struct SigmaOverlap {
  double score = 0.0;
  double gamma = 0.0;
};

struct SelectionStep {
  std::size_t step = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> terms;           // model fitted at this step
  std::vector<ParameterSummary> summaries;  // every trace column
  std::optional<std::string> removed;       // none on the last step
  std::optional<SigmaOverlap> overlap;      // against the previous step's fit
};

struct SelectionResult {
  std::vector<SelectionStep> history;
  CovariateSpec final_spec;
  std::optional<SigmaOverlap> full_vs_final;  // set when anything was removed
};

/// Covariate that the next elimination round would drop, if any: among
/// non-significant coefficients, excluding the intercept and any parent of a
/// retained interaction, the one with the smallest |median| / SD. Ties go to
/// the term listed later in `terms`.
std::optional<std::string> removal_candidate(const std::vector<std::string>& terms,
                                             const std::vector<ParameterSummary>& summaries);

/// Backward elimination: fit, summarize, drop one covariate, refit, until
/// every eligible coefficient's 95% interval excludes zero. Step s fits with
/// seed `sampler.seed + s`.
SelectionResult backward_select(const PanelDataset& data, const CovariateSpec& full_spec, const PriorConfig& prior,
                                const SamplerConfig& sampler, std::size_t workers = 0);

}  // namespace cdbayes
