#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdbayes/model.hpp"
#include "cdbayes/sampler.hpp"
#include "cdbayes/trial_data.hpp"

namespace cdbayes {

struct PanelLayout {
  std::vector<int> schedule{kVisitSchedule.begin(), kVisitSchedule.end()};
  std::array<std::size_t, 3> arm_patients{36, 36, 37};  // Placebo, U5000, U10000
  int sites = kSiteCount;
  // Independent per-visit dropout after the first scheduled visit.
  double dropout_rate = 0.0;
  // When set, exactly this many post-baseline visits are removed instead.
  std::optional<std::size_t> dropout_visits;
  std::array<double, 3> male_fraction{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double age_mean = 55.6;
  double age_sd = 12.0;
  int age_min = 18;
  int age_max = 90;

  std::size_t patients() const { return arm_patients[0] + arm_patients[1] + arm_patients[2]; }
  void validate() const;
};

/// Generative truth: coefficient values for the columns of `spec` (in
/// encoded column order, intercept first) plus the two scales.
struct SimulationTruth {
  CovariateSpec spec;
  Eigen::VectorXd beta;
  double sigma_gamma = 1.0;
  double sigma_score = 1.0;
};

struct SimulatedPanel {
  PanelDataset data;          // integer scores clamped to [0, 87]
  Eigen::VectorXd latent;     // unrounded, unclamped responses
  Eigen::VectorXd gamma;      // realized random intercepts
  std::size_t clamped = 0;    // rows whose rounded latent value left [0, 87]
};

SimulatedPanel simulate_panel(const SimulationTruth& truth, const PanelLayout& layout, std::uint64_t seed);

/// Model on the simulated design with the latent responses as data.
ModelDefinition latent_model(const SimulatedPanel& panel, const CovariateSpec& spec, const PriorConfig& prior);

struct SimulationPreset {
  std::string name;
  SimulationTruth truth;
  PanelLayout layout;
  std::uint64_t default_seed = 1;
};

/// "paper-truth": published final-model medians on the full trial layout.
/// "cdystonia-standin": the generator of the bundled example panel.
SimulationPreset simulation_preset(const std::string& name);
std::vector<std::string> simulation_preset_names();

struct SbcConfig {
  PriorConfig prior;
  CovariateSpec spec;
  PanelLayout layout;
  SamplerConfig sampler;
  std::size_t replications = 100;
  std::size_t bins = 20;
  double sigma_truncation = 50.0;
  // Requested L; capped by the pooled draw count. (L + 1) must be a multiple of bins.
  std::size_t rank_draws = 99;
  std::uint64_t seed = 0;

  static constexpr std::size_t kMinReplications = 20;
};

struct SbcParameterResult {
  std::string name;
  std::vector<std::size_t> histogram;
  double chi_square = 0.0;
  double p_value = 1.0;
};

struct SbcResult {
  std::size_t replications = 0;
  std::size_t rank_draws = 0;  // L; ranks take values 0..L
  std::vector<SbcParameterResult> parameters;
  double min_p_value = 1.0;
  double p_value = 1.0;  // Bonferroni-adjusted minimum over parameters
};

/// Prior draw -> simulate -> fit -> rank, repeated. Sigma upper bounds of
/// both the generating and the fitting prior are capped at
/// `sigma_truncation`. Ranks use L equally spaced pooled draws.
SbcResult sbc(const SbcConfig& config, std::size_t workers = 1);

/// Small calibration setup: 40 patients, visits {0, 4, 8, 12}, four
/// coefficients, one chain of 2000 draws, and a prior informative enough
/// that simulated panels stay on a sensible scale.
SbcConfig desk_sbc_config(std::uint64_t seed);

}  // namespace cdbayes
