#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdbayes/trial_data.hpp"

namespace cdbayes {

/// Hyperparameters of the random-intercept hierarchy.
///
///   y_ij   ~ Normal(x_ij' beta + gamma_i, sigma_score^2)
///   gamma_i ~ Normal(0, sigma_gamma^2)
///   beta_k ~ Normal(mu_beta, 1 / tau_beta)
///   mu_beta ~ Normal(mu_beta_mean, 1 / mu_beta_precision)
///   sigma_gamma ~ Uniform(0, sigma_gamma_upper)
///   sigma_score ~ Uniform(0, sigma_score_upper)
///   tau_beta ~ Gamma(tau_beta_shape, tau_beta_rate)
///
/// The optional `fixed_*` members pin a parameter to a constant, replacing its
/// hyperprior. They are how the prior-strength presets are expressed.
struct PriorConfig {
  double mu_beta_mean = 0.0;
  double mu_beta_precision = 1e-6;
  double sigma_gamma_upper = 1000.0;
  double sigma_score_upper = 1000.0;
  double tau_beta_shape = 0.001;
  double tau_beta_rate = 0.001;
  std::optional<double> fixed_tau_beta;
  std::optional<double> fixed_sigma_score;
  std::optional<double> fixed_sigma_gamma;

  void validate() const;
  bool operator==(const PriorConfig&) const = default;
};

PriorConfig default_prior();

// Flat "key=value" text, one field per line, keys are the member names.
PriorConfig parse_prior(std::istream& in);
PriorConfig load_prior(const std::string& path);
void write_prior(std::ostream& out, const PriorConfig& prior);

/// How a prior-strength preset replaces the default hyperpriors.
enum class PresetMode {
  FixedPrecisions,   // tau_beta fixed; sigma_score, sigma_gamma fixed to tau^-1/2
  FixedBetaPrecision // only tau_beta fixed; the sigma Uniform priors stay
};

struct NamedPrior {
  std::string name;
  double tau_beta = 0.0;
  double tau_score = 0.0;
  double tau_gamma = 0.0;
  PriorConfig prior;
};

/// VeryWeak, Weak, Moderate, in that order.
std::array<NamedPrior, 3> sensitivity_presets(PresetMode mode = PresetMode::FixedPrecisions,
                                              const PriorConfig& base = default_prior());

struct ParameterPoint {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double mu_beta = 0.0;
  double sigma_gamma = 1.0;
  double sigma_score = 1.0;
  double tau_beta = 1.0;
};

/// Design, response and prior, plus per-model quantities the sampler reuses
/// every sweep (X'X and its eigenvalue range, patient row lists).
class ModelDefinition {
 public:
  ModelDefinition(DesignMatrix design, Eigen::VectorXd response, PriorConfig prior);

  static ModelDefinition from_panel(const PanelDataset& data, const CovariateSpec& spec,
                                    const PriorConfig& prior);

  const DesignMatrix& design() const { return design_; }
  const Eigen::MatrixXd& X() const { return design_.values; }
  const Eigen::VectorXd& y() const { return response_; }
  const PriorConfig& prior() const { return prior_; }

  std::size_t rows() const { return design_.rows(); }
  std::size_t coefficients() const { return design_.cols(); }
  std::size_t patients() const { return design_.patient_count; }
  std::size_t patient_of_row(std::size_t row) const { return design_.patient_of_row[row]; }
  const std::vector<std::size_t>& rows_of_patient(std::size_t i) const { return patient_rows_[i]; }

  const Eigen::MatrixXd& xtx() const { return xtx_; }
  double xtx_min_eigenvalue() const { return xtx_eig_min_; }
  double xtx_max_eigenvalue() const { return xtx_eig_max_; }

  ModelDefinition with_prior(PriorConfig prior) const;

 private:
  DesignMatrix design_;
  Eigen::VectorXd response_;
  PriorConfig prior_;
  std::vector<std::vector<std::size_t>> patient_rows_;
  Eigen::MatrixXd xtx_;
  double xtx_eig_min_ = 0.0;
  double xtx_eig_max_ = 0.0;
};

/// Unnormalized log joint density of data and parameters; -inf outside the
/// prior support. Parameters pinned by `fixed_*` contribute no prior term.
double log_posterior(const ModelDefinition& model, const ParameterPoint& point);

/// Cov(y_ij, y_i'j') implied by the random-intercept structure. Visits are
/// identified by their (patient, visit) pair.
double marginal_covariance(const ParameterPoint& point, std::size_t patient_a, std::size_t visit_a,
                           std::size_t patient_b, std::size_t visit_b);

}  // namespace cdbayes
