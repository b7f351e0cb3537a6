#include "cdbayes/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "cdbayes/error.hpp"
#include "cdbayes/stat_tests.hpp"

namespace cdbayes {

void PanelLayout::validate() const {
  if (patients() < 2) throw Error(ErrorKind::InvalidLayout, "layout needs at least 2 patients");
  if (schedule.empty()) throw Error(ErrorKind::InvalidLayout, "empty visit schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (std::find(kVisitSchedule.begin(), kVisitSchedule.end(), schedule[i]) == kVisitSchedule.end())
      throw Error(ErrorKind::InvalidLayout, "week " + std::to_string(schedule[i]) + " is not a trial visit");
    if (i > 0 && schedule[i] <= schedule[i - 1])
      throw Error(ErrorKind::InvalidLayout, "visit schedule must be strictly increasing");
  }
  if (sites < 1 || sites > kSiteCount) throw Error(ErrorKind::InvalidLayout, "site count must be in [1, 9]");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorKind::InvalidLayout, "dropout rate must be in [0, 1)");
  if (dropout_visits && *dropout_visits > patients() * (schedule.size() - 1))
    throw Error(ErrorKind::InvalidLayout, "more dropped visits than post-baseline visits");
  for (double f : male_fraction)
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::InvalidLayout, "male fraction must be in [0, 1]");
  if (!(age_sd >= 0.0) || age_min < 1 || age_max < age_min) throw Error(ErrorKind::InvalidLayout, "bad age range");
}

namespace {

std::size_t draw_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(draw_uniform(rng) * static_cast<double>(n)));
}

// Fisher-Yates with our own uniform draws so the permutation is the same on every standard library.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw_index(rng, i)]);
}

}  // namespace

namespace {

// Patients, covariates and visits of a layout; scores are left at zero.
std::vector<ObservationRecord> simulate_records(const PanelLayout& layout, Rng& rng) {
  struct Patient {
    Arm arm;
    Sex sex;
    int site;
    int age;
  };
  std::vector<Patient> patients;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto n = layout.arm_patients[a];
    const auto males = static_cast<std::size_t>(std::lround(layout.male_fraction[a] * static_cast<double>(n)));
    std::vector<Sex> sexes(n, Sex::Female);
    std::fill_n(sexes.begin(), std::min(males, n), Sex::Male);
    shuffle(sexes, rng);
    std::vector<int> sites(n);
    for (std::size_t k = 0; k < n; ++k) sites[k] = 1 + static_cast<int>(k % static_cast<std::size_t>(layout.sites));
    shuffle(sites, rng);
    for (std::size_t k = 0; k < n; ++k) {
      const double age = std::round(draw_normal(rng, layout.age_mean, layout.age_sd));
      patients.push_back({static_cast<Arm>(a), sexes[k], sites[k],
                          static_cast<int>(std::clamp(age, double(layout.age_min), double(layout.age_max)))});
    }
  }
  shuffle(patients, rng);

  const std::size_t slots = layout.schedule.size();
  std::vector<char> keep(patients.size() * slots, 1);
  if (layout.dropout_visits) {
    std::vector<std::size_t> post;
    for (std::size_t i = 0; i < patients.size(); ++i)
      for (std::size_t s = 1; s < slots; ++s) post.push_back(i * slots + s);
    shuffle(post, rng);
    for (std::size_t d = 0; d < *layout.dropout_visits; ++d) keep[post[d]] = 0;
  } else if (layout.dropout_rate > 0.0) {
    for (std::size_t i = 0; i < patients.size(); ++i)
      for (std::size_t s = 1; s < slots; ++s)
        if (draw_uniform(rng) < layout.dropout_rate) keep[i * slots + s] = 0;
  }

  std::vector<ObservationRecord> records;
  for (std::size_t i = 0; i < patients.size(); ++i)
    for (std::size_t s = 0; s < slots; ++s) {
      if (!keep[i * slots + s]) continue;
      const auto& p = patients[i];
      records.push_back({std::to_string(i + 1), layout.schedule[s], p.site, p.arm, p.age, p.sex, 0});
    }
  return records;
}

}  // namespace

SimulatedPanel simulate_panel(const SimulationTruth& truth, const PanelLayout& layout, std::uint64_t seed) {
  layout.validate();
  if (!(truth.sigma_gamma >= 0.0 && truth.sigma_score >= 0.0) || !truth.beta.allFinite())
    throw Error(ErrorKind::InvalidLayout, "truth must have finite beta and non-negative scales");
  Rng rng = make_stream(seed, 0);
  auto records = simulate_records(layout, rng);
  const auto skeleton = PanelDataset::from_records(records);
  const auto design = encode_design(skeleton, truth.spec);
  if (static_cast<std::size_t>(truth.beta.size()) != design.cols())
    throw Error(ErrorKind::SpecMismatch, "truth has " + std::to_string(truth.beta.size()) +
                                             " coefficients, spec encodes " + std::to_string(design.cols()));

  SimulatedPanel out;
  out.gamma.resize(static_cast<Eigen::Index>(skeleton.patient_count()));
  for (Eigen::Index i = 0; i < out.gamma.size(); ++i) out.gamma(i) = draw_normal(rng, 0.0, truth.sigma_gamma);
  out.latent = design.values * truth.beta;
  for (std::size_t row = 0; row < records.size(); ++row) {
    const auto r = static_cast<Eigen::Index>(row);
    out.latent(r) += out.gamma(static_cast<Eigen::Index>(skeleton.patient_of_row(row))) +
                     draw_normal(rng, 0.0, truth.sigma_score);
    const double rounded = std::round(out.latent(r));
    if (rounded < 0.0 || rounded > kMaxScore) ++out.clamped;
    records[row].score = static_cast<int>(std::clamp(rounded, 0.0, double(kMaxScore)));
  }
  out.data = PanelDataset::from_records(std::move(records));
  return out;
}

ModelDefinition latent_model(const SimulatedPanel& panel, const CovariateSpec& spec, const PriorConfig& prior) {
  return ModelDefinition(encode_design(panel.data, spec), panel.latent, prior);
}

std::vector<std::string> simulation_preset_names() { return {"paper-truth", "cdystonia-standin"}; }

SimulationPreset simulation_preset(const std::string& name) {
  SimulationPreset preset;
  preset.name = name;
  if (name == "paper-truth") {
    preset.truth.spec = CovariateSpec::final_model();
    preset.truth.beta.resize(6);
    preset.truth.beta << 71.2967, -2.3940, -1.3611, 0.0595, -14.0381, -2.6204;
    preset.truth.sigma_gamma = 2.5556;
    preset.truth.sigma_score = 12.0214;
    preset.layout.dropout_rate = 0.035;
    preset.default_seed = 1;
    return preset;
  }
  if (name == "cdystonia-standin") {
    // Final-model effects plus null age and dose-onset terms. The intercept
    // puts the week-0 mean near 41.5; the male share falls with dose so that
    // raw arm means stay level while the adjusted treatment effect is negative.
    preset.truth.spec = {{"intercept", "treatment", "week", "week_sq", "sex", "site", "age", "dose_onset"}};
    preset.truth.beta.resize(8);
    preset.truth.beta << 61.6, -2.3940, -1.3611, 0.0595, -14.0381, -2.6204, 0.0, 0.0;
    preset.truth.sigma_gamma = 2.5556;
    preset.truth.sigma_score = 12.0214;
    preset.layout.male_fraction = {18.0 / 36.0, 12.0 / 36.0, 6.0 / 37.0};
    preset.layout.dropout_visits = 23;  // 654 scheduled visits -> 631 rows
    preset.default_seed = 2002;
    return preset;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown simulation preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Simulation-based calibration

SbcResult sbc(const SbcConfig& config, std::size_t workers) {
  if (config.replications < SbcConfig::kMinReplications)
    throw Error(ErrorKind::InvalidConfig, "sbc needs at least " + std::to_string(SbcConfig::kMinReplications) +
                                              " replications, got " + std::to_string(config.replications));
  if (config.bins < 2) throw Error(ErrorKind::InvalidConfig, "sbc needs at least 2 bins");
  config.sampler.validate();
  config.layout.validate();

  PriorConfig prior = config.prior;
  prior.sigma_gamma_upper = std::min(prior.sigma_gamma_upper, config.sigma_truncation);
  prior.sigma_score_upper = std::min(prior.sigma_score_upper, config.sigma_truncation);
  prior.validate();

  const std::size_t pooled = config.sampler.chains * config.sampler.iterations;
  if ((config.rank_draws + 1) % config.bins != 0)
    throw Error(ErrorKind::InvalidConfig, "rank_draws + 1 must be a multiple of bins");
  const std::size_t rank_draws = std::min(config.rank_draws, (pooled + 1) / config.bins * config.bins - 1);
  if (rank_draws + 1 < config.bins) throw Error(ErrorKind::InsufficientDraws, "too few draws for the requested bins");

  Rng probe_rng = make_stream(config.seed, 0);
  const auto columns = encode_design(PanelDataset::from_records(simulate_records(config.layout, probe_rng)),
                                     config.spec).columns;
  const auto k = static_cast<Eigen::Index>(columns.size());
  std::vector<std::string> names = columns;
  if (!prior.fixed_sigma_gamma) names.push_back("sigma_gamma");
  if (!prior.fixed_sigma_score) names.push_back("sigma_score");
  if (!prior.fixed_tau_beta) names.push_back("tau_beta");
  names.push_back("mu_beta");

  std::vector<std::vector<std::size_t>> ranks(config.replications);
  std::vector<std::exception_ptr> errors(config.replications);

  auto replicate = [&](std::size_t r) {
    Rng rng = make_stream(config.seed, r + 1);
    SimulationTruth truth;
    truth.spec = config.spec;
    const double mu = draw_normal(rng, prior.mu_beta_mean, 1.0 / std::sqrt(prior.mu_beta_precision));
    const double tau = prior.fixed_tau_beta.value_or(draw_gamma(rng, prior.tau_beta_shape, prior.tau_beta_rate));
    truth.beta.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) truth.beta(j) = draw_normal(rng, mu, 1.0 / std::sqrt(tau));
    truth.sigma_gamma = prior.fixed_sigma_gamma.value_or(prior.sigma_gamma_upper * draw_uniform(rng));
    truth.sigma_score = prior.fixed_sigma_score.value_or(prior.sigma_score_upper * draw_uniform(rng));

    const auto panel = simulate_panel(truth, config.layout, stream_seed(config.seed, r + 1));
    const auto model = latent_model(panel, config.spec, prior);
    SamplerConfig sampler = config.sampler;
    sampler.seed = mix64(stream_seed(config.seed, r + 1));
    sampler.keep_gamma = false;
    const auto trace = run_chains(model, sampler, 1);

    std::vector<double> truth_values(truth.beta.data(), truth.beta.data() + k);
    if (!prior.fixed_sigma_gamma) truth_values.push_back(truth.sigma_gamma);
    if (!prior.fixed_sigma_score) truth_values.push_back(truth.sigma_score);
    if (!prior.fixed_tau_beta) truth_values.push_back(tau);
    truth_values.push_back(mu);

    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < names.size(); ++p) {
      const auto draws = trace.pooled(trace.require(names[p]));
      std::size_t rank = 0;
      for (std::size_t d = 0; d < rank_draws; ++d)
        if (draws[d * draws.size() / rank_draws] < truth_values[p]) ++rank;
      out.push_back(rank);
    }
    ranks[r] = std::move(out);
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < config.replications; r = next++) {
      try {
        replicate(r);
      } catch (const Error& e) {
        errors[r] = std::make_exception_ptr(Error(e.kind(), "replication " + std::to_string(r) + ": " + e.detail()));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, config.replications); ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SbcResult result;
  result.replications = config.replications;
  result.rank_draws = rank_draws;
  for (std::size_t p = 0; p < names.size(); ++p) {
    SbcParameterResult pr;
    pr.name = names[p];
    pr.histogram.assign(config.bins, 0);
    for (const auto& rep : ranks) pr.histogram[rep[p] * config.bins / (rank_draws + 1)] += 1;
    const auto chi = chi_square_uniform(pr.histogram);
    pr.chi_square = chi.statistic;
    pr.p_value = chi.p_value;
    result.min_p_value = std::min(result.min_p_value, pr.p_value);
    result.parameters.push_back(std::move(pr));
  }
  result.p_value = std::min(1.0, result.min_p_value * static_cast<double>(names.size()));
  return result;
}

SbcConfig desk_sbc_config(std::uint64_t seed) {
  SbcConfig config;
  config.prior = default_prior();
  config.prior.mu_beta_precision = 0.01;
  config.prior.tau_beta_shape = 3.0;
  config.prior.tau_beta_rate = 30.0;
  config.spec.terms = {"intercept", "treatment", "week", "sex"};
  config.layout.schedule = {0, 4, 8, 12};
  config.layout.arm_patients = {13, 13, 14};
  config.layout.male_fraction = {0.5, 0.5, 0.5};
  config.sampler.chains = 1;
  config.sampler.iterations = 2000;
  config.sampler.burn_in = 500;
  config.sampler.init = InitMode::PriorDraw;
  config.seed = seed;
  config.sampler.seed = seed;
  return config;
}

}  // namespace cdbayes
