#include "cdbayes/analyses.hpp"

#include <algorithm>
#include <cmath>

#include "cdbayes/error.hpp"

namespace cdbayes {

double max_relative_change(const std::vector<double>& medians, double eps) {
  double worst = 0.0;
  for (std::size_t a = 0; a < medians.size(); ++a)
    for (std::size_t b = a + 1; b < medians.size(); ++b) {
      const double scale = std::max({std::abs(medians[a]), std::abs(medians[b]), eps});
      worst = std::max(worst, std::abs(medians[a] - medians[b]) / scale);
    }
  return worst;
}

SensitivityReport sensitivity_analysis(const PanelDataset& data, const CovariateSpec& spec,
                                       const SamplerConfig& sampler, PresetMode mode, const PriorConfig& base,
                                       std::size_t workers, double threshold) {
  SensitivityReport report;
  report.threshold = threshold;
  const auto presets = sensitivity_presets(mode, base);
  std::vector<std::string> names;
  for (const auto& preset : presets) {
    const auto model = ModelDefinition::from_panel(data, spec, preset.prior);
    SamplerConfig config = sampler;
    config.keep_gamma = false;
    const auto trace = run_chains(model, config, workers);
    report.presets.push_back(preset.name);
    report.summaries.push_back(summarize(trace));
    if (names.empty()) {
      names = model.design().columns;
      names.push_back("mu_beta");
    }
  }
  for (const auto& name : names) {
    SensitivityParameter p;
    p.name = name;
    for (const auto& s : report.summaries) p.medians.push_back(find_summary(s, name).median);
    p.max_relative_change = max_relative_change(p.medians);
    p.exceeds_threshold = p.max_relative_change > threshold;
    report.parameters.push_back(std::move(p));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<GroupPosterior> group_mean_posteriors(const TraceStore& trace, const PanelDataset& data,
                                                  const CovariateSpec& spec, GroupMeanMode mode) {
  const auto design = encode_design(data, spec);
  std::vector<std::size_t> trace_cols;
  for (const auto& c : design.columns) {
    auto idx = trace.index_of(c);
    if (!idx) throw Error(ErrorKind::SpecMismatch, "trace has no coefficient for design column '" + c + "'");
    trace_cols.push_back(*idx);
  }
  const auto k = static_cast<Eigen::Index>(design.cols());

  std::vector<GroupPosterior> groups;
  for (Arm arm : {Arm::Placebo, Arm::U5000, Arm::U10000}) {
    if (data.arm_counts()[static_cast<std::size_t>(arm_code(arm))] == 0) continue;

    Eigen::VectorXd xbar = Eigen::VectorXd::Zero(k);
    std::size_t rows = 0;
    if (mode == GroupMeanMode::Marginal) {
      for (std::size_t r = 0; r < data.size(); ++r)
        if (data.records()[r].arm == arm) {
          xbar += design.values.row(static_cast<Eigen::Index>(r)).transpose();
          ++rows;
        }
    } else {
      // Same centering offsets as the fitted design.
      double age_shift = 0.0;
      double week_shift = 0.0;
      for (const auto& rec : data.records()) {
        age_shift += rec.age;
        week_shift += rec.week;
      }
      age_shift = spec.center_age ? age_shift / static_cast<double>(data.size()) : 0.0;
      week_shift = spec.center_week ? week_shift / static_cast<double>(data.size()) : 0.0;
      for (auto rec : data.records()) {
        rec.arm = arm;
        for (Eigen::Index j = 0; j < k; ++j)
          xbar(j) += evaluate_term(design.columns[static_cast<std::size_t>(j)], rec, age_shift, week_shift);
        ++rows;
      }
    }
    xbar /= static_cast<double>(rows);

    GroupPosterior g;
    g.group = std::string(arm_name(arm));
    std::vector<double> pooled;
    for (const auto& chain : trace.chains) {
      std::vector<double> d(chain.draws());
      for (std::size_t i = 0; i < d.size(); ++i) {
        double v = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) v += xbar(j) * chain.at(i, trace_cols[static_cast<std::size_t>(j)]);
        d[i] = v;
      }
      pooled.insert(pooled.end(), d.begin(), d.end());
      g.draws.push_back(std::move(d));
    }
    g.median = quantile(pooled, 0.5);
    g.sd = sample_sd(pooled);
    g.interval = central_interval(pooled);
    groups.push_back(std::move(g));
  }
  return groups;
}

Contrast contrast(const GroupPosterior& a, const GroupPosterior& b, double level) {
  if (a.draws.size() != b.draws.size())
    throw Error(ErrorKind::SpecMismatch, "group posteriors come from different traces");
  Contrast c;
  c.first = a.group;
  c.second = b.group;
  std::size_t less = 0;
  std::size_t greater = 0;
  for (std::size_t ch = 0; ch < a.draws.size(); ++ch) {
    if (a.draws[ch].size() != b.draws[ch].size())
      throw Error(ErrorKind::SpecMismatch, "group posteriors come from different traces");
    for (std::size_t i = 0; i < a.draws[ch].size(); ++i) {
      const double d = a.draws[ch][i] - b.draws[ch][i];
      c.draws.push_back(d);
      if (d < 0.0) ++less;
      else if (d > 0.0) ++greater;
    }
  }
  if (c.draws.empty()) throw Error(ErrorKind::InsufficientDraws, "contrast of empty posteriors");
  const auto n = static_cast<double>(c.draws.size());
  c.median = quantile(c.draws, 0.5);
  c.interval = central_interval(c.draws, level);
  c.p_less = static_cast<double>(less) / n;
  c.p_greater = static_cast<double>(greater) / n;
  c.p_tie = static_cast<double>(c.draws.size() - less - greater) / n;
  c.contains_zero = c.interval.contains(0.0);
  return c;
}

std::vector<Contrast> pairwise_contrasts(const std::vector<GroupPosterior>& groups, double level) {
  std::vector<Contrast> out;
  for (std::size_t b = 0; b < groups.size(); ++b)
    for (std::size_t a = b + 1; a < groups.size(); ++a) out.push_back(contrast(groups[a], groups[b], level));
  return out;
}

}  // namespace cdbayes
