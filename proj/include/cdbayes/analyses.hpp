#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "cdbayes/diagnostics.hpp"
#include "cdbayes/model.hpp"
#include "cdbayes/sampler.hpp"
#include "cdbayes/trial_data.hpp"

namespace cdbayes {

// ---------------------------------------------------------------------------
// Prior sensitivity

struct SensitivityParameter {
  std::string name;
  std::vector<double> medians;  // one per preset, preset order
  double max_relative_change = 0.0;
  bool exceeds_threshold = false;
};

struct SensitivityReport {
  std::vector<std::string> presets;
  std::vector<std::vector<ParameterSummary>> summaries;  // per preset
  std::vector<SensitivityParameter> parameters;
  double threshold = 0.05;
};

/// |a - b| / max(|a|, |b|, eps), maximized over all preset pairs.
double max_relative_change(const std::vector<double>& medians, double eps = 1e-6);

/// Fits under each of the VeryWeak/Weak/Moderate presets with the same seed
/// and compares coefficient (and mu_beta) medians.
SensitivityReport sensitivity_analysis(const PanelDataset& data, const CovariateSpec& spec,
                                       const SamplerConfig& sampler, PresetMode mode = PresetMode::FixedPrecisions,
                                       const PriorConfig& base = default_prior(), std::size_t workers = 0,
                                       double threshold = 0.05);

// ---------------------------------------------------------------------------
// Group means and contrasts

enum class GroupMeanMode {
  // Average of x'beta over the arm's own observed rows.
  Marginal,
  // Average of x'beta over every observed row with the arm set to this one.
  Standardized,
};

struct GroupPosterior {
  std::string group;
  std::vector<std::vector<double>> draws;  // per chain, aligned with the trace
  double median = 0.0;
  double sd = 0.0;
  Interval interval;
};

std::vector<GroupPosterior> group_mean_posteriors(const TraceStore& trace, const PanelDataset& data,
                                                  const CovariateSpec& spec,
                                                  GroupMeanMode mode = GroupMeanMode::Marginal);

struct Contrast {
  std::string first;   // contrast is first - second
  std::string second;
  std::vector<double> draws;
  double median = 0.0;
  Interval interval;
  double p_less = 0.0;     // P(first - second < 0)
  double p_greater = 0.0;  // P(first - second > 0)
  double p_tie = 0.0;
  bool contains_zero = true;
};

/// Draw-by-draw difference a - b, pairing draws by chain and iteration.
Contrast contrast(const GroupPosterior& a, const GroupPosterior& b, double level = 0.95);

/// Every pair (later group - earlier group), in group order. Empty for fewer than 2 groups.
std::vector<Contrast> pairwise_contrasts(const std::vector<GroupPosterior>& groups, double level = 0.95);

}  // namespace cdbayes
