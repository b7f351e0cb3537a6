#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "cdbayes/error.hpp"
#include "cdbayes/synthetic.hpp"
#include "support.hpp"

using namespace cdbayes;

namespace {

SimulationTruth intercept_truth(double level, double sigma_gamma, double sigma_score) {
  SimulationTruth t;
  t.spec = CovariateSpec::intercept_only();
  t.beta = Eigen::VectorXd::Constant(1, level);
  t.sigma_gamma = sigma_gamma;
  t.sigma_score = sigma_score;
  return t;
}

}  // namespace

TEST_CASE("noiseless truth gives constant scores") {
  auto panel = simulate_panel(intercept_truth(40.0, 1e-9, 1e-9), PanelLayout{}, 3);
  REQUIRE(panel.data.size() == 654);
  for (const auto& r : panel.data.records()) CHECK(r.score == 40);
  CHECK(panel.clamped == 0);
  for (Eigen::Index i = 0; i < panel.latent.size(); ++i) CHECK(panel.latent(i) == doctest::Approx(40.0));
}

TEST_CASE("trial layout shape") {
  PanelLayout layout;
  CHECK(layout.patients() == 109);
  auto panel = simulate_panel(intercept_truth(40.0, 2.0, 5.0), layout, 1);
  CHECK(panel.data.size() == 654);
  CHECK(panel.data.patient_count() == 109);
  CHECK(panel.data.arm_counts() == std::array<std::size_t, 3>{36, 36, 37});
  std::set<int> sites;
  std::map<std::string, std::vector<int>> weeks;
  for (const auto& r : panel.data.records()) {
    sites.insert(r.site);
    weeks[r.patient_id].push_back(r.week);
  }
  CHECK(sites.size() == 9);
  for (const auto& [id, w] : weeks) CHECK(w == std::vector<int>{0, 2, 4, 8, 12, 16});
}

TEST_CASE("dropout rate reproduces the trial row count") {
  // 109 baselines are kept; 545 later visits each survive with probability 0.965.
  const auto preset = simulation_preset("paper-truth");
  const double expected = 109.0 + 545.0 * (1.0 - 0.035);
  std::vector<double> n;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto panel = simulate_panel(preset.truth, preset.layout, seed);
    n.push_back(static_cast<double>(panel.data.size()));
    std::set<std::string> baseline;
    for (const auto& r : panel.data.records())
      if (r.week == 0) baseline.insert(r.patient_id);
    CHECK(baseline.size() == 109);
  }
  auto ms = testing::mean_se(n);
  CHECK(std::abs(ms.mean - expected) < 3.0 * ms.se);
  CHECK(std::abs(ms.mean - 631.0) / 631.0 < 0.01);

  const auto standin = simulation_preset("cdystonia-standin");
  CHECK(simulate_panel(standin.truth, standin.layout, standin.default_seed).data.size() == 631);
}

TEST_CASE("simulation is deterministic in the seed") {
  const auto preset = simulation_preset("paper-truth");
  auto a = simulate_panel(preset.truth, preset.layout, 11);
  auto b = simulate_panel(preset.truth, preset.layout, 11);
  auto c = simulate_panel(preset.truth, preset.layout, 12);
  CHECK(a.data.records() == b.data.records());
  CHECK(a.latent == b.latent);
  CHECK(a.gamma == b.gamma);
  CHECK_FALSE(a.data.records() == c.data.records());
}

TEST_CASE("clamping is rare for the default truths") {
  for (const auto& name : simulation_preset_names()) {
    const auto preset = simulation_preset(name);
    std::size_t clamped = 0, rows = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto panel = simulate_panel(preset.truth, preset.layout, seed);
      clamped += panel.clamped;
      rows += panel.data.size();
    }
    CAPTURE(name);
    CHECK(static_cast<double>(clamped) < 0.01 * static_cast<double>(rows));
  }
  // A truth far outside the scale is clamped and counted.
  auto high = simulate_panel(intercept_truth(200.0, 1.0, 1.0), PanelLayout{}, 2);
  CHECK(high.clamped == high.data.size());
  for (const auto& r : high.data.records()) CHECK(r.score == kMaxScore);
}

TEST_CASE("simulated panels round-trip through the wire format") {
  const auto preset = simulation_preset("cdystonia-standin");
  auto panel = simulate_panel(preset.truth, preset.layout, 5);
  std::ostringstream out;
  write_panel(out, panel.data);
  auto back = parse_panel(out.str());
  CHECK(back.records() == panel.data.records());
}

TEST_CASE("latent responses follow the random-intercept covariance") {
  PanelLayout layout;
  layout.arm_patients = {3333, 3333, 3334};
  const double sg = 8.0, ss = 4.0;
  auto panel = simulate_panel(intercept_truth(10.0, sg, ss), layout, 21);
  const std::size_t visits = layout.schedule.size();
  const std::size_t patients = layout.patients();
  REQUIRE(panel.data.size() == patients * visits);

  // Residuals e_ij = y_ij - x'beta; rows are grouped by patient in visit order.
  auto e = [&](std::size_t i, std::size_t j) { return panel.latent(static_cast<Eigen::Index>(i * visits + j)) - 10.0; };

  // Same patient, visits 0 and 3; and averaged over every visit pair.
  std::vector<double> prod;
  for (std::size_t i = 0; i < patients; ++i) prod.push_back(e(i, 0) * e(i, 3));
  CHECK(std::abs(testing::mean_se(prod).mean - sg * sg) < 0.05 * sg * sg);

  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < patients; ++i)
    for (std::size_t j = 0; j < visits; ++j)
      for (std::size_t k = j + 1; k < visits; ++k, ++pairs) pair_sum += e(i, j) * e(i, k);
  CHECK(std::abs(pair_sum / static_cast<double>(pairs) - sg * sg) < 0.05 * sg * sg);

  // Same visit variance: sigma_gamma^2 + sigma_score^2.
  std::vector<double> sq;
  for (std::size_t i = 0; i < patients; ++i) sq.push_back(e(i, 2) * e(i, 2));
  CHECK(std::abs(testing::mean_se(sq).mean - (sg * sg + ss * ss)) < 0.05 * (sg * sg + ss * ss));

  // Different patients.
  std::vector<double> cross;
  for (std::size_t i = 0; i + 1 < patients; i += 2) cross.push_back(e(i, 1) * e(i + 1, 4));
  auto ms = testing::mean_se(cross);
  CHECK(std::abs(ms.mean) < 3.0 * ms.se);
}

TEST_CASE("covariates follow the layout") {
  PanelLayout layout;
  layout.male_fraction = {0.5, 0.25, 0.0};
  layout.sites = 3;
  auto panel = simulate_panel(intercept_truth(40.0, 1.0, 1.0), layout, 8);
  std::array<std::size_t, 3> males{};
  std::set<std::string> seen;
  for (const auto& r : panel.data.records()) {
    CHECK(r.site >= 1);
    CHECK(r.site <= 3);
    CHECK(r.age >= layout.age_min);
    CHECK(r.age <= layout.age_max);
    if (r.week == 0 && r.sex == Sex::Male) ++males[arm_code(r.arm)];
    seen.insert(r.patient_id);
  }
  CHECK(males == std::array<std::size_t, 3>{18, 9, 0});
  CHECK(seen.size() == 109);
}

TEST_CASE("invalid layouts and truths") {
  auto check_layout = [](PanelLayout l) {
    try {
      simulate_panel(intercept_truth(40, 1, 1), l, 1);
      FAIL("accepted a bad layout");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidLayout);
    }
  };
  PanelLayout l;
  l.schedule = {0, 3};
  check_layout(l);
  l = {};
  l.schedule = {4, 2};
  check_layout(l);
  l = {};
  l.schedule.clear();
  check_layout(l);
  l = {};
  l.arm_patients = {1, 0, 0};
  check_layout(l);
  l = {};
  l.sites = 10;
  check_layout(l);
  l = {};
  l.dropout_rate = 1.0;
  check_layout(l);
  l = {};
  l.male_fraction = {1.5, 0, 0};
  check_layout(l);

  auto t = intercept_truth(40, 1, 1);
  t.beta = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(simulate_panel(t, PanelLayout{}, 1), Error);
  t = intercept_truth(40, -1, 1);
  CHECK_THROWS_AS(simulate_panel(t, PanelLayout{}, 1), Error);
  CHECK_THROWS_AS(simulation_preset("nope"), Error);
}

TEST_CASE("SBC preconditions") {
  auto config = desk_sbc_config(1);
  config.replications = 19;
  try {
    sbc(config);
    FAIL("accepted 19 replications");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
  config = desk_sbc_config(1);
  config.rank_draws = 100;
  CHECK_THROWS_AS(sbc(config), Error);
}

TEST_CASE("SBC output shape and scheduling independence") {
  auto config = desk_sbc_config(3);
  config.replications = 20;
  config.sampler.iterations = 400;
  config.sampler.burn_in = 200;
  auto one = sbc(config, 1);
  auto two = sbc(config, 2);
  CHECK(one.replications == 20);
  CHECK(one.rank_draws == 99);
  REQUIRE(one.parameters.size() == 8);  // 4 coefficients, two sigmas, tau_beta, mu_beta
  CHECK(one.parameters[0].name == "intercept");
  CHECK(one.parameters.back().name == "mu_beta");
  for (std::size_t p = 0; p < one.parameters.size(); ++p) {
    std::size_t total = 0;
    for (auto h : one.parameters[p].histogram) total += h;
    CHECK(total == 20);
    CHECK(one.parameters[p].histogram.size() == 20);
    CHECK(one.parameters[p].histogram == two.parameters[p].histogram);
    CHECK(one.parameters[p].p_value >= 0.0);
    CHECK(one.parameters[p].p_value <= 1.0);
  }
  CHECK(one.p_value == two.p_value);
  CHECK(one.p_value >= one.min_p_value);

  // The rank count shrinks to fit a short chain.
  config.sampler.iterations = 150;
  config.rank_draws = 199;
  CHECK(sbc(config, 1).rank_draws == 139);
}
