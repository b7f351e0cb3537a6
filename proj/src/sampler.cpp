#include "cdbayes/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "cdbayes/error.hpp"

namespace cdbayes {

void SamplerConfig::validate() const {
  if (chains < 1) throw Error(ErrorKind::InvalidConfig, "chains must be >= 1");
  if (iterations < kMinIterations)
    throw Error(ErrorKind::InvalidConfig,
                "iterations must be >= " + std::to_string(kMinIterations) + ", got " + std::to_string(iterations));
  if (thin < 1) throw Error(ErrorKind::InvalidConfig, "thin must be >= 1");
}

std::vector<double> ChainTrace::column(std::size_t param) const {
  std::vector<double> out(draws());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = at(d, param);
  return out;
}

std::optional<std::size_t> TraceStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  return std::nullopt;
}

std::size_t TraceStore::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error(ErrorKind::SpecMismatch, "trace has no parameter '" + std::string(name) + "'");
}

std::vector<std::vector<double>> TraceStore::columns(std::size_t param) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.column(param));
  return out;
}

std::vector<double> TraceStore::pooled(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (const auto& c : chains)
    for (std::size_t d = 0; d < c.draws(); ++d) out.push_back(c.at(d, param));
  return out;
}

bool TraceStore::operator==(const TraceStore& other) const {
  if (names != other.names || chains.size() != other.chains.size()) return false;
  for (std::size_t c = 0; c < chains.size(); ++c)
    if (chains[c].chain_id != other.chains[c].chain_id || chains[c].values != other.chains[c].values) return false;
  return true;
}

std::vector<std::string> trace_names(const ModelDefinition& model, bool keep_gamma) {
  std::vector<std::string> names = model.design().columns;
  names.insert(names.end(), {"mu_beta", "sigma_gamma", "sigma_score", "tau_beta"});
  if (keep_gamma)
    for (std::size_t i = 0; i < model.patients(); ++i) names.push_back("gamma_" + std::to_string(i + 1));
  return names;
}

// ---------------------------------------------------------------------------
// Full conditionals

namespace {

constexpr double kMaxCondition = 1e12;

Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = draw_normal(rng);
  return z;
}

double effective_sigma_score(const ModelDefinition& m, const ChainState& s) {
  return m.prior().fixed_sigma_score.value_or(s.sigma_score);
}
double effective_sigma_gamma(const ModelDefinition& m, const ChainState& s) {
  return m.prior().fixed_sigma_gamma.value_or(s.sigma_gamma);
}
double effective_tau_beta(const PriorConfig& p, const ChainState& s) {
  return p.fixed_tau_beta.value_or(s.tau_beta);
}

}  // namespace

Eigen::VectorXd update_beta(const ModelDefinition& model, const ChainState& state, Rng& rng) {
  const auto k = static_cast<Eigen::Index>(model.coefficients());
  if (k == 0) return Eigen::VectorXd();
  const double sigma = effective_sigma_score(model, state);
  const double tau_score = 1.0 / (sigma * sigma);
  const double tau_beta = effective_tau_beta(model.prior(), state);

  // Eigenvalues of tau_score X'X + tau_beta I follow from those of X'X.
  const double cond = (tau_score * model.xtx_max_eigenvalue() + tau_beta) /
                      (tau_score * model.xtx_min_eigenvalue() + tau_beta);
  if (!(cond <= kMaxCondition))
    throw Error(ErrorKind::SingularSystem, "beta conditional precision has condition number " + std::to_string(cond));

  Eigen::MatrixXd precision = tau_score * model.xtx();
  precision.diagonal().array() += tau_beta;

  Eigen::VectorXd residual = model.y();
  for (std::size_t row = 0; row < model.rows(); ++row)
    residual(static_cast<Eigen::Index>(row)) -= state.gamma(static_cast<Eigen::Index>(model.patient_of_row(row)));
  Eigen::VectorXd rhs = tau_score * (model.X().transpose() * residual);
  rhs.array() += tau_beta * state.mu_beta;

  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::SingularSystem, "beta conditional precision is not positive definite");
  Eigen::VectorXd mean = llt.solve(rhs);
  // L L' = Q, so L'^{-1} z has covariance Q^{-1}.
  Eigen::VectorXd noise = llt.matrixU().solve(standard_normal_vector(k, rng));
  return mean + noise;
}

Eigen::VectorXd update_gamma(const ModelDefinition& model, const ChainState& state, Rng& rng) {
  const double sigma = effective_sigma_score(model, state);
  const double sigma_g = effective_sigma_gamma(model, state);
  const double tau_score = 1.0 / (sigma * sigma);
  const double tau_gamma = 1.0 / (sigma_g * sigma_g);
  const Eigen::VectorXd fitted = model.X() * state.beta;

  Eigen::VectorXd gamma(static_cast<Eigen::Index>(model.patients()));
  for (std::size_t i = 0; i < model.patients(); ++i) {
    const auto& rows = model.rows_of_patient(i);
    double sum = 0.0;
    for (auto row : rows) {
      const auto r = static_cast<Eigen::Index>(row);
      sum += model.y()(r) - fitted(r);
    }
    const double precision = static_cast<double>(rows.size()) * tau_score + tau_gamma;
    const double mean = tau_score * sum / precision;
    gamma(static_cast<Eigen::Index>(i)) = draw_normal(rng, mean, 1.0 / std::sqrt(precision));
  }
  return gamma;
}

double update_mu_beta(const ChainState& state, const PriorConfig& prior, Rng& rng) {
  const double tau_beta = effective_tau_beta(prior, state);
  const auto k = static_cast<double>(state.beta.size());
  const double precision = prior.mu_beta_precision + k * tau_beta;
  const double mean = (prior.mu_beta_precision * prior.mu_beta_mean + tau_beta * state.beta.sum()) / precision;
  return draw_normal(rng, mean, 1.0 / std::sqrt(precision));
}

double update_tau_beta(const ChainState& state, const PriorConfig& prior, Rng& rng) {
  if (prior.fixed_tau_beta) return *prior.fixed_tau_beta;
  const double ss = (state.beta.array() - state.mu_beta).square().sum();
  const double shape = prior.tau_beta_shape + 0.5 * static_cast<double>(state.beta.size());
  const double rate = prior.tau_beta_rate + 0.5 * ss;
  return draw_gamma(rng, shape, rate);
}

double slice_sigma(double sigma, double m, double ss, double upper, Rng& rng) {
  const double u_max = std::log(upper);
  auto log_density = [&](double u) {
    if (u >= u_max) return -std::numeric_limits<double>::infinity();
    // Jacobian of sigma = exp(u) adds +u.
    return (1.0 - m) * u - 0.5 * ss * std::exp(-2.0 * u);
  };

  constexpr double width = 1.0;
  constexpr int max_steps = 10000;
  const double u0 = std::log(sigma);
  const double level = log_density(u0) - draw_exponential(rng);

  double left = u0 - width * draw_uniform(rng);
  double right = left + width;
  for (int i = 0; i < max_steps && log_density(left) > level; ++i) left -= width;
  for (int i = 0; i < max_steps && log_density(right) > level; ++i) right += width;

  for (;;) {
    const double u1 = left + draw_uniform(rng) * (right - left);
    if (log_density(u1) > level) return std::exp(u1);
    if (u1 < u0) left = u1;
    else right = u1;
  }
}

double update_sigma(const ModelDefinition& model, const ChainState& state, SigmaKind which, Rng& rng) {
  const auto& prior = model.prior();
  double m = 0.0;
  double ss = 0.0;
  double upper = 0.0;
  double current = 0.0;
  if (which == SigmaKind::Score) {
    if (prior.fixed_sigma_score) return *prior.fixed_sigma_score;
    const Eigen::VectorXd fitted = model.X() * state.beta;
    for (std::size_t row = 0; row < model.rows(); ++row) {
      const auto r = static_cast<Eigen::Index>(row);
      const double e = model.y()(r) - fitted(r) - state.gamma(static_cast<Eigen::Index>(model.patient_of_row(row)));
      ss += e * e;
    }
    m = static_cast<double>(model.rows());
    upper = prior.sigma_score_upper;
    current = state.sigma_score;
  } else {
    if (prior.fixed_sigma_gamma) return *prior.fixed_sigma_gamma;
    ss = state.gamma.squaredNorm();
    m = static_cast<double>(model.patients());
    upper = prior.sigma_gamma_upper;
    current = state.sigma_gamma;
  }
  if (ss == 0.0 && m > 0.0)
    throw Error(ErrorKind::DegenerateSS, std::string(which == SigmaKind::Score ? "sigma_score" : "sigma_gamma") +
                                             ": residual sum of squares is exactly zero");
  if (!(current > 0.0 && current < upper)) current = 0.5 * upper;
  return slice_sigma(current, m, ss, upper, rng);
}

// ---------------------------------------------------------------------------

namespace {

double sample_sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

double clamp_scale(double value, double upper) {
  if (!std::isfinite(value) || value <= 0.0) value = 1.0;
  return std::clamp(value, 1e-6, 0.99 * upper);
}

}  // namespace

ChainState initial_state(const ModelDefinition& model, InitMode mode, Rng& rng) {
  const auto& prior = model.prior();
  const auto k = static_cast<Eigen::Index>(model.coefficients());
  const auto p = static_cast<Eigen::Index>(model.patients());
  ChainState s;
  if (mode == InitMode::PriorDraw) {
    s.mu_beta = draw_normal(rng, prior.mu_beta_mean, 1.0 / std::sqrt(prior.mu_beta_precision));
    s.tau_beta = prior.fixed_tau_beta.value_or(draw_gamma(rng, prior.tau_beta_shape, prior.tau_beta_rate));
    s.sigma_score = prior.fixed_sigma_score.value_or(prior.sigma_score_upper * draw_uniform(rng));
    s.sigma_gamma = prior.fixed_sigma_gamma.value_or(prior.sigma_gamma_upper * draw_uniform(rng));
    s.beta.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) s.beta(j) = draw_normal(rng, s.mu_beta, 1.0 / std::sqrt(s.tau_beta));
    s.gamma.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) s.gamma(i) = draw_normal(rng, 0.0, s.sigma_gamma);
  } else {
    // Ridge least squares, zero random intercepts, moment-based scales.
    Eigen::MatrixXd a = model.xtx();
    a.diagonal().array() += 1e-6;
    s.beta = k > 0 ? Eigen::VectorXd(a.ldlt().solve(model.X().transpose() * model.y())) : Eigen::VectorXd();
    s.gamma = Eigen::VectorXd::Zero(p);
    const Eigen::VectorXd resid = model.y() - model.X() * s.beta;
    s.sigma_score = prior.fixed_sigma_score.value_or(clamp_scale(sample_sd(resid), prior.sigma_score_upper));
    Eigen::VectorXd patient_means(p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const auto& rows = model.rows_of_patient(static_cast<std::size_t>(i));
      double sum = 0.0;
      for (auto row : rows) sum += resid(static_cast<Eigen::Index>(row));
      patient_means(i) = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
    }
    s.sigma_gamma = prior.fixed_sigma_gamma.value_or(clamp_scale(sample_sd(patient_means), prior.sigma_gamma_upper));
    s.mu_beta = k > 0 ? s.beta.mean() : prior.mu_beta_mean;
    const double var_beta = k > 1 ? sample_sd(s.beta) * sample_sd(s.beta) : 1.0;
    s.tau_beta = prior.fixed_tau_beta.value_or(1.0 / var_beta + 1e-12);
  }
  return s;
}

void gibbs_sweep(const ModelDefinition& model, ChainState& state, Rng& rng, const FrozenParams& frozen) {
  if (!frozen.beta) state.beta = update_beta(model, state, rng);
  if (!frozen.gamma) state.gamma = update_gamma(model, state, rng);
  if (!frozen.mu_beta) state.mu_beta = update_mu_beta(state, model.prior(), rng);
  if (!frozen.tau_beta) state.tau_beta = update_tau_beta(state, model.prior(), rng);
  if (!frozen.sigma_score) state.sigma_score = update_sigma(model, state, SigmaKind::Score, rng);
  if (!frozen.sigma_gamma) state.sigma_gamma = update_sigma(model, state, SigmaKind::Gamma, rng);
}

namespace {

void append_draw(ChainTrace& trace, const ChainState& s, bool keep_gamma) {
  auto& v = trace.values;
  v.insert(v.end(), s.beta.data(), s.beta.data() + s.beta.size());
  v.push_back(s.mu_beta);
  v.push_back(s.sigma_gamma);
  v.push_back(s.sigma_score);
  v.push_back(s.tau_beta);
  if (keep_gamma) v.insert(v.end(), s.gamma.data(), s.gamma.data() + s.gamma.size());
}

bool state_finite(const ChainState& s) {
  return s.beta.allFinite() && s.gamma.allFinite() && std::isfinite(s.mu_beta) && std::isfinite(s.tau_beta) &&
         std::isfinite(s.sigma_gamma) && std::isfinite(s.sigma_score);
}

}  // namespace

ChainTrace run_chain(const ModelDefinition& model, const SamplerConfig& config, std::size_t chain_id) {
  config.validate();
  Rng rng = make_stream(config.seed, chain_id);
  ChainTrace trace;
  trace.chain_id = chain_id;
  trace.params = model.coefficients() + 4 + (config.keep_gamma ? model.patients() : 0);
  trace.values.reserve(trace.params * config.iterations);

  ChainState state = initial_state(model, config.init, rng);
  const std::size_t sweeps = config.burn_in + config.iterations * config.thin;
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    try {
      gibbs_sweep(model, state, rng, config.frozen);
      if (!state_finite(state)) throw Error(ErrorKind::NonFinite, "state became non-finite");
    } catch (const Error& e) {
      throw Error(e.kind(), "chain " + std::to_string(chain_id) + ", sweep " + std::to_string(sweep) + ": " + e.detail());
    }
    if (sweep >= config.burn_in && (sweep - config.burn_in + 1) % config.thin == 0)
      append_draw(trace, state, config.keep_gamma);
  }
  return trace;
}

TraceStore run_chains(const ModelDefinition& model, const SamplerConfig& config, std::size_t workers) {
  config.validate();
  TraceStore store;
  store.names = trace_names(model, config.keep_gamma);
  store.chains.resize(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, config.chains);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < config.chains; c = next++) {
      try {
        store.chains[c] = run_chain(model, config, c + 1);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return store;
}

}  // namespace cdbayes
