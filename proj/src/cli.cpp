#include "cdbayes/cli.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cdbayes/analyses.hpp"
#include "cdbayes/diagnostics.hpp"
#include "cdbayes/error.hpp"
#include "cdbayes/model.hpp"
#include "cdbayes/report.hpp"
#include "cdbayes/sampler.hpp"
#include "cdbayes/selection.hpp"
#include "cdbayes/synthetic.hpp"
#include "cdbayes/trial_data.hpp"

namespace cdbayes {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string data;
  std::string spec;
  std::string prior_file;
  std::string preset;
  std::size_t chains = 4;
  std::size_t iterations = 10000;
  std::size_t burn_in = 2000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  CLI::Option* seed_opt = nullptr;
  std::string out_dir = ".";
  std::size_t workers = 0;
  std::string interval = "central";
  std::string init = "data-driven";
  bool keep_gamma = false;
};

struct Io {
  std::istream& in;
  std::ostream& out;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
  s.erase(std::remove(s.begin(), s.end(), '_'), s.end());
  return s;
}

void add_data(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "Panel CSV (id,week,site,treat,age,sex,twstrs); '-' reads standard input")
      ->required();
}

void add_model(CLI::App* sub, Options& o, const std::string& default_spec) {
  o.spec = default_spec;
  sub->add_option("--spec", o.spec, "Covariates: full, final or file:<path>")->capture_default_str();
  sub->add_option("--prior-file", o.prior_file, "Prior overrides as key=value lines");
  sub->add_option("--preset", o.preset, "Fixed-precision prior preset: very-weak, weak or moderate");
}

void add_sampler(CLI::App* sub, Options& o, bool seed_required) {
  sub->add_option("--chains", o.chains, "Number of chains")->capture_default_str();
  sub->add_option("--iterations", o.iterations, "Retained draws per chain")->capture_default_str();
  sub->add_option("--burn-in", o.burn_in, "Discarded warm-up sweeps per chain")->capture_default_str();
  sub->add_option("--thin", o.thin, "Keep every n-th sweep")->capture_default_str();
  o.seed_opt = sub->add_option("--seed", o.seed, seed_required ? "Root seed (required)" : "Root seed");
  if (!seed_required) o.seed_opt->capture_default_str();
  sub->add_option("--workers", o.workers, "Worker threads; 0 uses every core")->capture_default_str();
  sub->add_option("--init", o.init, "Chain initialization: data-driven or prior-draw")->capture_default_str();
}

void add_output(CLI::App* sub, Options& o) {
  sub->add_option("--out-dir", o.out_dir, "Report directory; '-' prints the main report to standard output")
      ->capture_default_str();
}

void require_seed(const Options& o) {
  if (o.seed_opt->count() == 0) throw Error(ErrorKind::InvalidConfig, "--seed is required");
}

PanelDataset read_data(const Options& o, Io& io) {
  if (o.data == "-") return parse_panel(io.in);
  return load_panel(o.data);
}

CovariateSpec resolve_spec(const std::string& text) {
  if (text == "full") return CovariateSpec::full();
  if (text == "final") return CovariateSpec::final_model();
  if (text.rfind("file:", 0) == 0) {
    const std::string path = text.substr(5);
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open spec file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return CovariateSpec::parse(buf.str());
  }
  throw Error(ErrorKind::InvalidConfig, "--spec must be full, final or file:<path>, got '" + text + "'");
}

PriorConfig resolve_prior(const Options& o) {
  PriorConfig prior = o.prior_file.empty() ? default_prior() : load_prior(o.prior_file);
  if (!o.preset.empty()) {
    bool found = false;
    for (const auto& p : sensitivity_presets(PresetMode::FixedPrecisions, prior)) {
      if (lower(p.name) == lower(o.preset)) {
        prior = p.prior;
        found = true;
      }
    }
    if (!found) throw Error(ErrorKind::InvalidConfig, "unknown prior preset '" + o.preset + "'");
  }
  prior.validate();
  return prior;
}

SamplerConfig resolve_sampler(const Options& o) {
  SamplerConfig c;
  c.chains = o.chains;
  c.iterations = o.iterations;
  c.burn_in = o.burn_in;
  c.thin = o.thin;
  c.seed = o.seed;
  c.keep_gamma = o.keep_gamma;
  if (o.init == "data-driven")
    c.init = InitMode::DataDriven;
  else if (o.init == "prior-draw")
    c.init = InitMode::PriorDraw;
  else
    throw Error(ErrorKind::InvalidConfig, "--init must be data-driven or prior-draw");
  c.validate();
  return c;
}

IntervalKind resolve_interval(const std::string& s) {
  if (s == "central") return IntervalKind::Central;
  if (s == "hpd") return IntervalKind::Hpd;
  throw Error(ErrorKind::InvalidConfig, "--interval must be central or hpd");
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

// Writes the main report either into the output directory or to stdout.
void emit(const Options& o, Io& io, const std::string& file, const Json& report) {
  const std::string text = dump_json(report);
  if (o.out_dir == "-") {
    io.out << text;
    return;
  }
  fs::create_directories(o.out_dir);
  write_file(fs::path(o.out_dir) / file, text);
}

int cmd_fit(const Options& o, bool densities, Io& io) {
  require_seed(o);
  const auto spec = resolve_spec(o.spec);
  const auto prior = resolve_prior(o);
  const auto sampler = resolve_sampler(o);
  const auto kind = resolve_interval(o.interval);
  const auto data = read_data(o, io);
  const auto model = ModelDefinition::from_panel(data, spec, prior);
  const auto trace = run_chains(model, sampler, o.workers);
  const auto summaries = summarize(trace, kind);

  emit(o, io, "summary.json", summary_report(summaries, model.design().columns));
  if (o.out_dir == "-") return kExitOk;

  const fs::path dir(o.out_dir);
  for (const auto& chain : trace.chains) {
    std::ostringstream csv;
    write_trace_csv(csv, trace.names, chain);
    write_file(dir / ("trace_" + std::to_string(chain.chain_id) + ".csv"), csv.str());
  }
  write_file(dir / "manifest.json",
             dump_json(manifest(model, spec, sampler, trace.names, o.data == "-" ? "<stdin>" : o.data)));
  if (densities) {
    for (const char* name : {"sigma_gamma", "sigma_score"}) {
      const auto curve = kde(trace.pooled(trace.require(name)));
      std::ostringstream csv;
      write_density_csv(csv, curve.grid, curve.density);
      write_file(dir / (std::string("density_") + name + ".csv"), csv.str());
    }
  }
  return kExitOk;
}

int cmd_select(const Options& o, Io& io) {
  require_seed(o);
  const auto spec = resolve_spec(o.spec);
  const auto prior = resolve_prior(o);
  const auto sampler = resolve_sampler(o);
  const auto data = read_data(o, io);
  const auto result = backward_select(data, spec, prior, sampler, o.workers);
  emit(o, io, "steps.json", selection_report(result));
  return kExitOk;
}

int cmd_sensitivity(const Options& o, const std::string& mode_text, double threshold, Io& io) {
  const auto spec = resolve_spec(o.spec);
  const auto base = resolve_prior(o);
  const auto sampler = resolve_sampler(o);
  PresetMode mode;
  if (mode_text == "fixed-precisions")
    mode = PresetMode::FixedPrecisions;
  else if (mode_text == "fixed-beta-precision")
    mode = PresetMode::FixedBetaPrecision;
  else
    throw Error(ErrorKind::InvalidConfig, "--mode must be fixed-precisions or fixed-beta-precision");
  const auto data = read_data(o, io);
  const auto report = sensitivity_analysis(data, spec, sampler, mode, base, o.workers, threshold);
  emit(o, io, "stability.json", sensitivity_report(report));
  return kExitOk;
}

int cmd_contrasts(const Options& o, const std::string& group_mode, Io& io) {
  const auto spec = resolve_spec(o.spec);
  const auto prior = resolve_prior(o);
  const auto sampler = resolve_sampler(o);
  GroupMeanMode mode;
  if (group_mode == "marginal")
    mode = GroupMeanMode::Marginal;
  else if (group_mode == "standardized")
    mode = GroupMeanMode::Standardized;
  else
    throw Error(ErrorKind::InvalidConfig, "--group-mode must be marginal or standardized");
  const auto data = read_data(o, io);
  const auto model = ModelDefinition::from_panel(data, spec, prior);
  const auto trace = run_chains(model, sampler, o.workers);
  const auto groups = group_mean_posteriors(trace, data, spec, mode);
  emit(o, io, "contrasts.json", contrast_report(groups, pairwise_contrasts(groups)));
  return kExitOk;
}

int cmd_simulate(const std::string& preset_name, const CLI::Option* seed_opt, std::uint64_t seed,
                 const std::string& output, Io& io) {
  const auto preset = simulation_preset(preset_name);
  const std::uint64_t s = seed_opt->count() ? seed : preset.default_seed;
  const auto panel = simulate_panel(preset.truth, preset.layout, s);
  if (output == "-") {
    write_panel(io.out, panel.data);
    return kExitOk;
  }
  std::ostringstream csv;
  write_panel(csv, panel.data);
  write_file(output, csv.str());
  return kExitOk;
}

struct SbcOptions {
  std::size_t replications = 100;
  std::size_t bins = 20;
  std::size_t rank_draws = 99;
  std::size_t iterations = 2000;
  std::size_t burn_in = 500;
  std::vector<std::string> freeze;
};

int cmd_sbc(const Options& o, const SbcOptions& s, Io& io) {
  require_seed(o);
  auto config = desk_sbc_config(o.seed);
  config.replications = s.replications;
  config.bins = s.bins;
  config.rank_draws = s.rank_draws;
  config.sampler.iterations = s.iterations;
  config.sampler.burn_in = s.burn_in;
  for (const auto& name : s.freeze) {
    if (name == "sigma_score")
      config.sampler.frozen.sigma_score = true;
    else if (name == "sigma_gamma")
      config.sampler.frozen.sigma_gamma = true;
    else if (name == "tau_beta")
      config.sampler.frozen.tau_beta = true;
    else if (name == "mu_beta")
      config.sampler.frozen.mu_beta = true;
    else
      throw Error(ErrorKind::InvalidConfig, "cannot freeze '" + name + "'");
  }
  const auto result = sbc(config, o.workers);
  emit(o, io, "sbc.json", sbc_report(result));
  return kExitOk;
}

int cmd_baseline(const Options& o, Io& io) {
  const auto data = read_data(o, io);
  emit(o, io, "baseline.json", to_json(baseline_summary(data)));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Io io{in, out};
  CLI::App app{"Bayesian random-intercept analysis of longitudinal TWSTRS trial panels", "cdbayes"};
  app.require_subcommand(1);

  Options fo, so, seo, co, sbo, bo;
  std::function<int()> action;

  auto* fit = app.add_subcommand("fit", "Fit the model and write summary.json, trace_<c>.csv and manifest.json");
  bool densities = false;
  add_data(fit, fo);
  add_model(fit, fo, "full");
  add_sampler(fit, fo, true);
  add_output(fit, fo);
  fit->add_option("--interval", fo.interval, "Interval type: central or hpd")->capture_default_str();
  fit->add_flag("--keep-gamma", fo.keep_gamma, "Also trace the patient random intercepts");
  fit->add_flag("--densities", densities, "Write kernel density curves of both scale parameters");
  fit->callback([&] { action = [&] { return cmd_fit(fo, densities, io); }; });

  auto* select = app.add_subcommand("select", "Backward elimination by credible interval; writes steps.json");
  add_data(select, so);
  add_model(select, so, "full");
  add_sampler(select, so, true);
  add_output(select, so);
  select->callback([&] { action = [&] { return cmd_select(so, io); }; });

  auto* sens = app.add_subcommand("sensitivity", "Refit under three prior presets; writes stability.json");
  std::string mode = "fixed-precisions";
  double threshold = 0.05;
  add_data(sens, seo);
  add_model(sens, seo, "final");
  add_sampler(sens, seo, false);
  add_output(sens, seo);
  sens->add_option("--mode", mode, "fixed-precisions or fixed-beta-precision")->capture_default_str();
  sens->add_option("--threshold", threshold, "Relative change flagged as sensitive")->capture_default_str();
  sens->callback([&] { action = [&] { return cmd_sensitivity(seo, mode, threshold, io); }; });

  auto* con = app.add_subcommand("contrasts", "Arm mean posteriors and pairwise differences; writes contrasts.json");
  std::string group_mode = "marginal";
  add_data(con, co);
  add_model(con, co, "final");
  add_sampler(con, co, false);
  add_output(con, co);
  con->add_option("--group-mode", group_mode, "marginal or standardized")->capture_default_str();
  con->callback([&] { action = [&] { return cmd_contrasts(co, group_mode, io); }; });

  auto* sim = app.add_subcommand("simulate", "Write a synthetic panel CSV");
  std::string sim_preset = "paper-truth";
  std::string sim_output = "-";
  std::uint64_t sim_seed = 0;
  std::string preset_help = "Simulation preset:";
  for (const auto& n : simulation_preset_names()) preset_help += " " + n;
  sim->add_option("--preset", sim_preset, preset_help)->capture_default_str();
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Root seed; defaults to the preset's own seed");
  sim->add_option("--output", sim_output, "Output CSV; '-' writes standard output")->capture_default_str();
  sim->callback([&] { action = [&] { return cmd_simulate(sim_preset, sim_seed_opt, sim_seed, sim_output, io); }; });

  auto* sbc_cmd = app.add_subcommand("sbc", "Simulation-based calibration at desk scale; writes sbc.json");
  SbcOptions sbc_opts;
  sbo.seed_opt = sbc_cmd->add_option("--seed", sbo.seed, "Root seed (required)");
  sbc_cmd->add_option("--replications", sbc_opts.replications, "Replications")->capture_default_str();
  sbc_cmd->add_option("--bins", sbc_opts.bins, "Rank histogram bins")->capture_default_str();
  sbc_cmd->add_option("--rank-draws", sbc_opts.rank_draws, "Posterior draws per rank")->capture_default_str();
  sbc_cmd->add_option("--iterations", sbc_opts.iterations, "Retained draws per fit")->capture_default_str();
  sbc_cmd->add_option("--burn-in", sbc_opts.burn_in, "Warm-up sweeps per fit")->capture_default_str();
  sbc_cmd->add_option("--workers", sbo.workers, "Worker threads; 0 uses every core")->capture_default_str();
  sbc_cmd->add_option("--freeze", sbc_opts.freeze,
                      "Hold a parameter at its initial value (mutation control): "
                      "sigma_score, sigma_gamma, tau_beta or mu_beta");
  add_output(sbc_cmd, sbo);
  sbc_cmd->callback([&] { action = [&] { return cmd_sbc(sbo, sbc_opts, io); }; });

  auto* base = app.add_subcommand("baseline", "Week-0 summaries by arm and sex; writes baseline.json");
  add_data(base, bo);
  add_output(base, bo);
  base->callback([&] { action = [&] { return cmd_baseline(bo, io); }; });

  std::vector<const char*> argv{"cdbayes"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.is_sampler_error() ? kExitSampler : kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cdbayes
