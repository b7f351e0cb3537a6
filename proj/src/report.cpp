#include "cdbayes/report.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace cdbayes {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_string(std::string& out, const std::string& s) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

void write_value(std::string& out, const Json& v, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        write_string(out, it.key());
        out += indent < 0 ? ":" : ": ";
        write_value(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        write_value(out, e, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_double(d) : "null";
      return;
    }
    case Json::value_t::string:
      write_string(out, v.get<std::string>());
      return;
    default:
      out += v.dump();
  }
}

Json number(double v) { return Json(v); }

}  // namespace

std::string dump_json(const Json& value, int indent) {
  std::string out;
  write_value(out, value, indent, 0);
  out += '\n';
  return out;
}

Json to_json(const ParameterSummary& s) {
  Json j;
  j["mean"] = number(s.mean);
  j["median"] = number(s.median);
  j["sd"] = number(s.sd);
  j["lower"] = number(s.interval.lower);
  j["upper"] = number(s.interval.upper);
  j["ess"] = number(s.ess);
  j["rhat"] = number(s.rhat);
  Json gz = Json::array();
  for (double z : s.geweke_z) gz.push_back(number(z));
  j["geweke_z"] = gz;
  j["significant"] = s.significant;
  return j;
}

Json to_json(const PriorConfig& p) {
  Json j;
  j["mu_beta_mean"] = number(p.mu_beta_mean);
  j["mu_beta_precision"] = number(p.mu_beta_precision);
  j["sigma_gamma_upper"] = number(p.sigma_gamma_upper);
  j["sigma_score_upper"] = number(p.sigma_score_upper);
  j["tau_beta_shape"] = number(p.tau_beta_shape);
  j["tau_beta_rate"] = number(p.tau_beta_rate);
  if (p.fixed_tau_beta) j["fixed_tau_beta"] = number(*p.fixed_tau_beta);
  if (p.fixed_sigma_score) j["fixed_sigma_score"] = number(*p.fixed_sigma_score);
  if (p.fixed_sigma_gamma) j["fixed_sigma_gamma"] = number(*p.fixed_sigma_gamma);
  return j;
}

Json to_json(const SamplerConfig& c) {
  Json j;
  j["chains"] = c.chains;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["init"] = c.init == InitMode::DataDriven ? "data-driven" : "prior-draw";
  return j;
}

Json to_json(const BaselineSummary& summary) {
  auto groups = [](const std::vector<BaselineGroup>& gs) {
    Json out;
    for (const auto& g : gs) {
      Json j;
      j["patients"] = g.patients;
      j["mean_score"] = number(g.mean_score);
      j["sd_score"] = number(g.sd_score);
      j["mean_age"] = number(g.mean_age);
      out[g.group] = j;
    }
    return out;
  };
  Json j;
  j["schema"] = kReportSchema;
  j["by_arm"] = groups(summary.by_arm);
  j["by_sex"] = groups(summary.by_sex);
  return j;
}

Json summary_report(const std::vector<ParameterSummary>& summaries, const std::vector<std::string>& beta_names) {
  Json j;
  j["schema"] = kReportSchema;
  Json beta = Json::object();
  Json variance = Json::object();
  Json hyper = Json::object();
  Json random = Json::object();
  for (const auto& name : beta_names) beta[name] = to_json(find_summary(summaries, name));
  for (const char* name : {"sigma_gamma", "sigma_score", "tau_beta"})
    variance[name] = to_json(find_summary(summaries, name));
  hyper["mu_beta"] = to_json(find_summary(summaries, "mu_beta"));
  for (const auto& s : summaries)
    if (s.name.rfind("gamma_", 0) == 0) random[s.name] = to_json(s);
  j["beta"] = beta;
  j["variance"] = variance;
  j["hyperparameters"] = hyper;
  if (!random.empty()) j["random_effects"] = random;
  return j;
}

namespace {

Json overlap_json(const std::optional<SigmaOverlap>& o) {
  if (!o) return nullptr;
  Json j;
  j["sigma_score"] = number(o->score);
  j["sigma_gamma"] = number(o->gamma);
  return j;
}

Json summaries_json(const std::vector<ParameterSummary>& summaries) {
  Json j = Json::object();
  for (const auto& s : summaries) j[s.name] = to_json(s);
  return j;
}

}  // namespace

Json selection_report(const SelectionResult& result) {
  Json steps = Json::array();
  for (const auto& step : result.history) {
    Json s;
    s["step"] = step.step;
    s["seed"] = step.seed;
    s["terms"] = step.terms;
    s["removed"] = step.removed ? Json(*step.removed) : Json(nullptr);
    s["summaries"] = summaries_json(step.summaries);
    s["sigma_overlap"] = overlap_json(step.overlap);
    steps.push_back(s);
  }
  Json j;
  j["schema"] = kReportSchema;
  j["steps"] = steps;
  j["final_terms"] = result.final_spec.terms;
  j["full_vs_final_sigma_overlap"] = overlap_json(result.full_vs_final);
  return j;
}

Json sensitivity_report(const SensitivityReport& report) {
  Json j;
  j["schema"] = kReportSchema;
  j["presets"] = report.presets;
  j["threshold"] = number(report.threshold);
  Json params = Json::object();
  for (const auto& p : report.parameters) {
    Json e;
    Json medians = Json::object();
    for (std::size_t i = 0; i < p.medians.size(); ++i) medians[report.presets[i]] = number(p.medians[i]);
    e["medians"] = medians;
    e["max_relative_change"] = number(p.max_relative_change);
    e["exceeds_threshold"] = p.exceeds_threshold;
    params[p.name] = e;
  }
  j["parameters"] = params;
  Json fits = Json::object();
  for (std::size_t i = 0; i < report.presets.size(); ++i) fits[report.presets[i]] = summaries_json(report.summaries[i]);
  j["fits"] = fits;
  return j;
}

Json contrast_report(const std::vector<GroupPosterior>& groups, const std::vector<Contrast>& contrasts) {
  Json j;
  j["schema"] = kReportSchema;
  Json g = Json::object();
  for (const auto& group : groups) {
    Json e;
    e["median"] = number(group.median);
    e["sd"] = number(group.sd);
    e["lower"] = number(group.interval.lower);
    e["upper"] = number(group.interval.upper);
    g[group.group] = e;
  }
  j["groups"] = g;
  Json cs = Json::array();
  for (const auto& c : contrasts) {
    Json e;
    e["first"] = c.first;
    e["second"] = c.second;
    e["median"] = number(c.median);
    e["lower"] = number(c.interval.lower);
    e["upper"] = number(c.interval.upper);
    e["p_less"] = number(c.p_less);
    e["p_greater"] = number(c.p_greater);
    e["p_tie"] = number(c.p_tie);
    e["contains_zero"] = c.contains_zero;
    cs.push_back(e);
  }
  j["contrasts"] = cs;
  return j;
}

Json sbc_report(const SbcResult& result) {
  Json j;
  j["schema"] = kReportSchema;
  j["replications"] = result.replications;
  j["rank_draws"] = result.rank_draws;
  j["p_value"] = number(result.p_value);
  j["min_p_value"] = number(result.min_p_value);
  Json params = Json::object();
  for (const auto& p : result.parameters) {
    Json e;
    e["histogram"] = p.histogram;
    e["chi_square"] = number(p.chi_square);
    e["p_value"] = number(p.p_value);
    params[p.name] = e;
  }
  j["parameters"] = params;
  return j;
}

std::string model_digest(const ModelDefinition& model, const CovariateSpec& spec) {
  std::ostringstream text;
  text << spec.to_string() << '|';
  for (const auto& c : model.design().columns) text << c << ',';
  text << '|';
  write_prior(text, model.prior());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

Json manifest(const ModelDefinition& model, const CovariateSpec& spec, const SamplerConfig& config,
              const std::vector<std::string>& columns, const std::string& data_source) {
  Json j;
  j["schema"] = kReportSchema;
  j["seed"] = config.seed;
  j["config"] = to_json(config);
  j["prior"] = to_json(model.prior());
  j["spec"] = spec.to_string();
  j["columns"] = columns;
  j["model_digest"] = model_digest(model, spec);
  j["data"] = data_source;
  j["rows"] = model.rows();
  j["patients"] = model.patients();
  Json files = Json::array();
  for (std::size_t c = 1; c <= config.chains; ++c) files.push_back("trace_" + std::to_string(c) + ".csv");
  j["traces"] = files;
  return j;
}

void write_trace_csv(std::ostream& out, const std::vector<std::string>& names, const ChainTrace& chain) {
  std::string line;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) line += ',';
    line += names[i];
  }
  out << line << '\n';
  for (std::size_t d = 0; d < chain.draws(); ++d) {
    line.clear();
    for (std::size_t p = 0; p < chain.params; ++p) {
      if (p) line += ',';
      line += format_double(chain.at(d, p));
    }
    out << line << '\n';
  }
}

void write_density_csv(std::ostream& out, const std::vector<double>& grid, const std::vector<double>& density) {
  out << "x,density\n";
  for (std::size_t i = 0; i < grid.size(); ++i) out << format_double(grid[i]) << ',' << format_double(density[i]) << '\n';
}

}  // namespace cdbayes
