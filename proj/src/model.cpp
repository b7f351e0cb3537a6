#include "cdbayes/model.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cdbayes/error.hpp"

namespace cdbayes {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void require_positive(double v, const char* name) {
  if (!positive_finite(v))
    throw Error(ErrorKind::InvalidPrior, std::string(name) + " must be finite and > 0");
}

}  // namespace

void PriorConfig::validate() const {
  if (!std::isfinite(mu_beta_mean)) throw Error(ErrorKind::InvalidPrior, "mu_beta_mean must be finite");
  require_positive(mu_beta_precision, "mu_beta_precision");
  require_positive(sigma_gamma_upper, "sigma_gamma_upper");
  require_positive(sigma_score_upper, "sigma_score_upper");
  require_positive(tau_beta_shape, "tau_beta_shape");
  require_positive(tau_beta_rate, "tau_beta_rate");
  if (fixed_tau_beta) require_positive(*fixed_tau_beta, "fixed_tau_beta");
  if (fixed_sigma_score) require_positive(*fixed_sigma_score, "fixed_sigma_score");
  if (fixed_sigma_gamma) require_positive(*fixed_sigma_gamma, "fixed_sigma_gamma");
}

PriorConfig default_prior() { return PriorConfig{}; }

PriorConfig parse_prior(std::istream& in) {
  PriorConfig prior;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    std::string key = line.substr(0, eq);
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    key = strip(key);
    if (key.empty() && eq == std::string::npos) continue;
    if (eq == std::string::npos)
      throw Error(ErrorKind::InvalidPrior, "line " + std::to_string(line_no) + ": expected key=value");
    const std::string text = strip(line.substr(eq + 1));
    double value = 0.0;
    std::istringstream parse(text);
    if (!(parse >> value) || !(parse >> std::ws).eof())
      throw Error(ErrorKind::InvalidPrior,
                  "line " + std::to_string(line_no) + ": '" + text + "' is not a number");
    if (key == "mu_beta_mean") prior.mu_beta_mean = value;
    else if (key == "mu_beta_precision") prior.mu_beta_precision = value;
    else if (key == "sigma_gamma_upper") prior.sigma_gamma_upper = value;
    else if (key == "sigma_score_upper") prior.sigma_score_upper = value;
    else if (key == "tau_beta_shape") prior.tau_beta_shape = value;
    else if (key == "tau_beta_rate") prior.tau_beta_rate = value;
    else if (key == "fixed_tau_beta") prior.fixed_tau_beta = value;
    else if (key == "fixed_sigma_score") prior.fixed_sigma_score = value;
    else if (key == "fixed_sigma_gamma") prior.fixed_sigma_gamma = value;
    else throw Error(ErrorKind::InvalidPrior, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  prior.validate();
  return prior;
}

PriorConfig load_prior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open prior file '" + path + "'");
  return parse_prior(in);
}

void write_prior(std::ostream& out, const PriorConfig& p) {
  std::ostringstream s;
  s.precision(17);
  s << "mu_beta_mean=" << p.mu_beta_mean << '\n'
    << "mu_beta_precision=" << p.mu_beta_precision << '\n'
    << "sigma_gamma_upper=" << p.sigma_gamma_upper << '\n'
    << "sigma_score_upper=" << p.sigma_score_upper << '\n'
    << "tau_beta_shape=" << p.tau_beta_shape << '\n'
    << "tau_beta_rate=" << p.tau_beta_rate << '\n';
  if (p.fixed_tau_beta) s << "fixed_tau_beta=" << *p.fixed_tau_beta << '\n';
  if (p.fixed_sigma_score) s << "fixed_sigma_score=" << *p.fixed_sigma_score << '\n';
  if (p.fixed_sigma_gamma) s << "fixed_sigma_gamma=" << *p.fixed_sigma_gamma << '\n';
  out << s.str();
}

std::array<NamedPrior, 3> sensitivity_presets(PresetMode mode, const PriorConfig& base) {
  std::array<NamedPrior, 3> presets{{
      {"VeryWeak", 0.00001, 0.001, 0.001, base},
      {"Weak", 0.0001, 0.01, 0.01, base},
      {"Moderate", 0.001, 0.1, 0.1, base},
  }};
  for (auto& p : presets) {
    p.prior.fixed_tau_beta = p.tau_beta;
    if (mode == PresetMode::FixedPrecisions) {
      p.prior.fixed_sigma_score = 1.0 / std::sqrt(p.tau_score);
      p.prior.fixed_sigma_gamma = 1.0 / std::sqrt(p.tau_gamma);
    }
  }
  return presets;
}

// ---------------------------------------------------------------------------

ModelDefinition::ModelDefinition(DesignMatrix design, Eigen::VectorXd response, PriorConfig prior)
    : design_(std::move(design)), response_(std::move(response)), prior_(std::move(prior)) {
  prior_.validate();
  const auto n = design_.rows();
  const auto k = design_.cols();
  if (static_cast<std::size_t>(design_.values.cols()) != k)
    throw Error(ErrorKind::InvariantViolation, "design column names do not match matrix width");
  if (static_cast<std::size_t>(response_.size()) != n)
    throw Error(ErrorKind::InvariantViolation, "response length " + std::to_string(response_.size()) +
                                                   " differs from design rows " + std::to_string(n));
  if (design_.patient_of_row.size() != n)
    throw Error(ErrorKind::InvariantViolation, "patient_of_row length differs from design rows");
  if (design_.patient_count < 2)
    throw Error(ErrorKind::InvariantViolation, "model needs at least 2 patients");
  if (!design_.values.allFinite() || !response_.allFinite())
    throw Error(ErrorKind::NonFinite, "design or response contains NaN/inf");

  patient_rows_.assign(design_.patient_count, {});
  for (std::size_t row = 0; row < n; ++row) {
    const auto p = design_.patient_of_row[row];
    if (p >= design_.patient_count)
      throw Error(ErrorKind::InvariantViolation, "row " + std::to_string(row) + " maps to unknown patient");
    patient_rows_[p].push_back(row);
  }
  if (n > 0)
    for (std::size_t c = 0; c < k; ++c)
      if (design_.values.col(static_cast<Eigen::Index>(c)).cwiseAbs().maxCoeff() == 0.0)
        throw Error(ErrorKind::InvariantViolation, "design column '" + design_.columns[c] + "' is identically zero");

  xtx_ = design_.values.transpose() * design_.values;
  if (k > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx_, Eigen::EigenvaluesOnly);
    xtx_eig_min_ = std::max(0.0, eig.eigenvalues().minCoeff());
    xtx_eig_max_ = std::max(0.0, eig.eigenvalues().maxCoeff());
  }
}

ModelDefinition ModelDefinition::from_panel(const PanelDataset& data, const CovariateSpec& spec,
                                            const PriorConfig& prior) {
  auto design = encode_design(data, spec);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t row = 0; row < data.size(); ++row)
    y(static_cast<Eigen::Index>(row)) = data.records()[row].score;
  return ModelDefinition(std::move(design), std::move(y), prior);
}

ModelDefinition ModelDefinition::with_prior(PriorConfig prior) const {
  ModelDefinition copy = *this;
  prior.validate();
  copy.prior_ = std::move(prior);
  return copy;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double normal_logpdf(double x, double mean, double precision) {
  const double d = x - mean;
  return 0.5 * (std::log(precision) - kLog2Pi) - 0.5 * precision * d * d;
}

}  // namespace

double log_posterior(const ModelDefinition& model, const ParameterPoint& point) {
  const auto& prior = model.prior();
  const auto k = static_cast<Eigen::Index>(model.coefficients());
  const auto p = static_cast<Eigen::Index>(model.patients());
  if (point.beta.size() != k || point.gamma.size() != p)
    throw Error(ErrorKind::SpecMismatch, "parameter point dimensions do not match the model");
  if (!point.beta.allFinite() || !point.gamma.allFinite() || !std::isfinite(point.mu_beta) ||
      !std::isfinite(point.sigma_gamma) || !std::isfinite(point.sigma_score) || !std::isfinite(point.tau_beta))
    throw Error(ErrorKind::NonFinite, "parameter point contains NaN/inf");

  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const double sigma_score = prior.fixed_sigma_score.value_or(point.sigma_score);
  const double sigma_gamma = prior.fixed_sigma_gamma.value_or(point.sigma_gamma);
  const double tau_beta = prior.fixed_tau_beta.value_or(point.tau_beta);
  if (sigma_score <= 0.0 || sigma_gamma <= 0.0 || tau_beta <= 0.0) return neg_inf;

  double lp = 0.0;
  if (!prior.fixed_sigma_score) {
    if (sigma_score >= prior.sigma_score_upper) return neg_inf;
    lp -= std::log(prior.sigma_score_upper);
  }
  if (!prior.fixed_sigma_gamma) {
    if (sigma_gamma >= prior.sigma_gamma_upper) return neg_inf;
    lp -= std::log(prior.sigma_gamma_upper);
  }
  if (!prior.fixed_tau_beta) {
    const double a = prior.tau_beta_shape;
    const double b = prior.tau_beta_rate;
    lp += a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(tau_beta) - b * tau_beta;
  }

  const Eigen::VectorXd fitted = model.X() * point.beta;
  const double tau_score = 1.0 / (sigma_score * sigma_score);
  for (std::size_t row = 0; row < model.rows(); ++row) {
    const auto r = static_cast<Eigen::Index>(row);
    const double mean = fitted(r) + point.gamma(static_cast<Eigen::Index>(model.patient_of_row(row)));
    lp += normal_logpdf(model.y()(r), mean, tau_score);
  }
  const double tau_gamma = 1.0 / (sigma_gamma * sigma_gamma);
  for (Eigen::Index i = 0; i < p; ++i) lp += normal_logpdf(point.gamma(i), 0.0, tau_gamma);
  for (Eigen::Index j = 0; j < k; ++j) lp += normal_logpdf(point.beta(j), point.mu_beta, tau_beta);
  lp += normal_logpdf(point.mu_beta, prior.mu_beta_mean, prior.mu_beta_precision);
  return lp;
}

double marginal_covariance(const ParameterPoint& point, std::size_t patient_a, std::size_t visit_a,
                           std::size_t patient_b, std::size_t visit_b) {
  const double var_gamma = point.sigma_gamma * point.sigma_gamma;
  if (patient_a != patient_b) return 0.0;
  if (visit_a != visit_b) return var_gamma;
  return point.sigma_score * point.sigma_score + var_gamma;
}

}  // namespace cdbayes
