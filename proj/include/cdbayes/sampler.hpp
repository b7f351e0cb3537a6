#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cdbayes/model.hpp"
#include "cdbayes/random.hpp"

namespace cdbayes {

enum class InitMode { PriorDraw, DataDriven };

// Parameters whose update is skipped. Only used to build negative controls.
struct FrozenParams {
  bool beta = false;
  bool gamma = false;
  bool mu_beta = false;
  bool tau_beta = false;
  bool sigma_score = false;
  bool sigma_gamma = false;
};

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 10000;  // retained draws per chain
  std::size_t burn_in = 2000;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  InitMode init = InitMode::DataDriven;
  bool keep_gamma = false;
  FrozenParams frozen;

  static constexpr std::size_t kMinIterations = 100;
  void validate() const;
};

using ChainState = ParameterPoint;

/// Retained draws of one chain, row-major (draw x parameter).
struct ChainTrace {
  std::size_t chain_id = 0;
  std::size_t params = 0;
  std::vector<double> values;

  std::size_t draws() const { return params == 0 ? 0 : values.size() / params; }
  double at(std::size_t draw, std::size_t param) const { return values[draw * params + param]; }
  std::vector<double> column(std::size_t param) const;
};

struct TraceStore {
  std::vector<std::string> names;
  std::vector<ChainTrace> chains;

  std::size_t draws_per_chain() const { return chains.empty() ? 0 : chains.front().draws(); }
  std::size_t total_draws() const { return draws_per_chain() * chains.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require(std::string_view name) const;
  // One vector per chain.
  std::vector<std::vector<double>> columns(std::size_t param) const;
  std::vector<double> pooled(std::size_t param) const;
  bool operator==(const TraceStore& other) const;
};

/// Names of the retained quantities, in trace column order.
std::vector<std::string> trace_names(const ModelDefinition& model, bool keep_gamma);

// Full-conditional updates. Each returns the new value and leaves `state` untouched.
Eigen::VectorXd update_beta(const ModelDefinition& model, const ChainState& state, Rng& rng);
Eigen::VectorXd update_gamma(const ModelDefinition& model, const ChainState& state, Rng& rng);
double update_mu_beta(const ChainState& state, const PriorConfig& prior, Rng& rng);
double update_tau_beta(const ChainState& state, const PriorConfig& prior, Rng& rng);

enum class SigmaKind { Score, Gamma };
double update_sigma(const ModelDefinition& model, const ChainState& state, SigmaKind which, Rng& rng);

/// One stepping-out/shrinkage slice update on u = log(sigma) for the density
/// sigma^-m exp(-ss / (2 sigma^2)) on (0, upper).
double slice_sigma(double sigma, double m, double ss, double upper, Rng& rng);

ChainState initial_state(const ModelDefinition& model, InitMode mode, Rng& rng);

/// One full sweep in the order beta, gamma, mu_beta, tau_beta, sigma_score, sigma_gamma.
void gibbs_sweep(const ModelDefinition& model, ChainState& state, Rng& rng, const FrozenParams& frozen = {});

/// Chain ids start at 1; chain c draws from stream (config.seed, c).
ChainTrace run_chain(const ModelDefinition& model, const SamplerConfig& config, std::size_t chain_id);

/// Runs chains 1..C on up to `workers` threads (0 = hardware concurrency).
/// The result does not depend on the worker count.
TraceStore run_chains(const ModelDefinition& model, const SamplerConfig& config, std::size_t workers = 0);

}  // namespace cdbayes
