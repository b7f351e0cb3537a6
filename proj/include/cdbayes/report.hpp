#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdbayes/analyses.hpp"
#include "cdbayes/diagnostics.hpp"
#include "cdbayes/model.hpp"
#include "cdbayes/sampler.hpp"
#include "cdbayes/selection.hpp"
#include "cdbayes/synthetic.hpp"
#include "cdbayes/trial_data.hpp"

namespace cdbayes {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;

/// Serializes with keys in insertion order and every floating-point value
/// printed with 17 significant digits ("%.17g"); non-finite values become null.
std::string dump_json(const Json& value, int indent = 2);

/// "%.17g"
std::string format_double(double v);

Json to_json(const ParameterSummary& s);
Json to_json(const PriorConfig& prior);
Json to_json(const SamplerConfig& config);
Json to_json(const BaselineSummary& summary);

/// {"schema", "beta": {...}, "variance": {sigma_gamma, sigma_score, tau_beta},
///  "hyperparameters": {mu_beta}, "random_effects": {...}} keyed by parameter name.
Json summary_report(const std::vector<ParameterSummary>& summaries, const std::vector<std::string>& beta_names);

Json selection_report(const SelectionResult& result);
Json sensitivity_report(const SensitivityReport& report);
Json contrast_report(const std::vector<GroupPosterior>& groups, const std::vector<Contrast>& contrasts);
Json sbc_report(const SbcResult& result);

/// FNV-1a 64-bit digest of the covariate spec, design columns and prior, as hex.
std::string model_digest(const ModelDefinition& model, const CovariateSpec& spec);

Json manifest(const ModelDefinition& model, const CovariateSpec& spec, const SamplerConfig& config,
              const std::vector<std::string>& columns, const std::string& data_source);

/// Header row of parameter names, then one row per retained draw.
void write_trace_csv(std::ostream& out, const std::vector<std::string>& names, const ChainTrace& chain);
void write_density_csv(std::ostream& out, const std::vector<double>& grid, const std::vector<double>& density);

}  // namespace cdbayes
