#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cdbayes/analyses.hpp"
#include "cdbayes/error.hpp"
#include "cdbayes/synthetic.hpp"
#include "support.hpp"

using namespace cdbayes;
using testing::rec;

namespace {

// Trace with the given column names whose draws are produced by `fill(chain, draw, column)`.
template <typename F>
TraceStore make_trace(std::vector<std::string> names, std::size_t chains, std::size_t draws, F fill) {
  TraceStore t;
  t.names = std::move(names);
  for (std::size_t c = 0; c < chains; ++c) {
    ChainTrace ch;
    ch.chain_id = c + 1;
    ch.params = t.names.size();
    for (std::size_t d = 0; d < draws; ++d)
      for (std::size_t p = 0; p < ch.params; ++p) ch.values.push_back(fill(c, d, p));
    t.chains.push_back(ch);
  }
  return t;
}

GroupPosterior normal_group(std::string name, std::uint64_t seed, double mean, std::size_t chains = 2,
                            std::size_t draws = 5000) {
  auto rng = make_stream(seed, 0);
  GroupPosterior g;
  g.group = std::move(name);
  for (std::size_t c = 0; c < chains; ++c) {
    std::vector<double> d(draws);
    for (auto& v : d) v = draw_normal(rng, mean, 1.0);
    g.draws.push_back(d);
  }
  return g;
}

PanelDataset three_arm_panel() {
  return PanelDataset::from_records({
      rec("a", 0, Arm::Placebo, 30),
      rec("a", 4, Arm::Placebo, 31),
      rec("b", 0, Arm::U5000, 40),
      rec("b", 2, Arm::U5000, 41),
      rec("b", 8, Arm::U5000, 42),
      rec("c", 16, Arm::U10000, 50),
  });
}

}  // namespace

TEST_CASE("max relative change") {
  CHECK(max_relative_change({1.0, 1.02}) == doctest::Approx(0.02 / 1.02));
  CHECK(max_relative_change({2.0, 2.0, 2.0}) == 0.0);
  CHECK(max_relative_change({0.0, 0.0}) == 0.0);
  // Below eps the denominator is eps.
  CHECK(max_relative_change({0.0, 1e-9}) == doctest::Approx(1e-3));
  CHECK(max_relative_change({-1.0, 1.0}) == doctest::Approx(2.0));
  // Worst pair among three.
  CHECK(max_relative_change({10.0, 10.5, 9.0}) == doctest::Approx(1.5 / 10.5));
  CHECK(max_relative_change({5.0}) == 0.0);
}

TEST_CASE("max relative change is symmetric in preset order") {
  auto rng = make_stream(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> m{draw_normal(rng), draw_normal(rng), draw_normal(rng)};
    const double base = max_relative_change(m);
    std::sort(m.begin(), m.end());
    do {
      CHECK(max_relative_change(m) == base);
    } while (std::next_permutation(m.begin(), m.end()));
  }
}

TEST_CASE("identical fits give zero change") {
  auto data = load_panel(testing::data_path("cdystonia.csv"));
  const auto prior = sensitivity_presets()[1].prior;
  auto model = ModelDefinition::from_panel(data, CovariateSpec::final_model(), prior);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 500;
  cfg.burn_in = 200;
  cfg.seed = 5;
  auto a = summarize(run_chains(model, cfg, 1));
  auto b = summarize(run_chains(model, cfg, 2));
  for (const auto& s : a) CHECK(max_relative_change({s.median, find_summary(b, s.name).median}) == 0.0);
}

TEST_CASE("sensitivity report layout") {
  auto data = load_panel(testing::data_path("cdystonia.csv"));
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iterations = 500;
  cfg.burn_in = 200;
  cfg.seed = 3;
  auto report = sensitivity_analysis(data, CovariateSpec::final_model(), cfg, PresetMode::FixedPrecisions,
                                     default_prior(), 1, 0.05);
  CHECK(report.presets == std::vector<std::string>{"VeryWeak", "Weak", "Moderate"});
  CHECK(report.summaries.size() == 3);
  REQUIRE(report.parameters.size() == 7);  // six coefficients and mu_beta
  CHECK(report.parameters.front().name == "intercept");
  CHECK(report.parameters.back().name == "mu_beta");
  for (const auto& p : report.parameters) {
    REQUIRE(p.medians.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(p.medians[k] == find_summary(report.summaries[k], p.name).median);
    CHECK(p.max_relative_change == max_relative_change(p.medians));
    CHECK(p.exceeds_threshold == (p.max_relative_change > 0.05));
  }
  // Fixed precisions pin the scales: VeryWeak has tau_score = 0.001.
  const auto& pinned = find_summary(report.summaries[0], "sigma_score");
  CHECK(pinned.median == doctest::Approx(1.0 / std::sqrt(0.001)));
  CHECK(pinned.sd == doctest::Approx(0.0).epsilon(1e-12));

  auto alt = sensitivity_analysis(data, CovariateSpec::final_model(), cfg, PresetMode::FixedBetaPrecision,
                                  default_prior(), 1);
  CHECK(find_summary(alt.summaries[0], "sigma_score").sd > 0.0);
}

TEST_CASE("strong signal keeps the treatment effect stable across presets") {
  SimulationTruth truth;
  truth.spec = CovariateSpec::final_model();
  truth.beta.resize(6);
  truth.beta << 60.0, -8.0, -1.3611, 0.0595, -14.0381, -2.6204;
  truth.sigma_gamma = 2.0;
  truth.sigma_score = 4.0;
  auto panel = simulate_panel(truth, PanelLayout{}, 77);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iterations = 5000;
  cfg.burn_in = 1000;
  cfg.seed = 9;
  auto report = sensitivity_analysis(panel.data, truth.spec, cfg);
  const auto& t = *std::find_if(report.parameters.begin(), report.parameters.end(),
                                [](const auto& p) { return p.name == "treatment"; });
  MESSAGE("treatment medians " << t.medians[0] << " " << t.medians[1] << " " << t.medians[2]);
  CHECK(t.max_relative_change < 0.05);
  CHECK_FALSE(t.exceeds_threshold);
}

TEST_CASE("group means from an intercept-only posterior") {
  auto data = three_arm_panel();
  auto spec = CovariateSpec::final_model();
  auto trace = make_trace({"intercept", "treatment", "week", "week_sq", "sex", "site"}, 2, 150,
                          [](std::size_t, std::size_t, std::size_t p) { return p == 0 ? 37.5 : 0.0; });
  for (auto mode : {GroupMeanMode::Marginal, GroupMeanMode::Standardized}) {
    auto groups = group_mean_posteriors(trace, data, spec, mode);
    REQUIRE(groups.size() == 3);
    for (const auto& g : groups) {
      CHECK(g.median == doctest::Approx(37.5));
      CHECK(g.sd == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(g.draws.size() == 2);
    }
  }
}

TEST_CASE("group means average the linear predictor over each arm's rows") {
  auto data = three_arm_panel();
  CovariateSpec spec{{"intercept", "treatment", "week"}};
  // beta = (b0, b1, b2) with b0 varying by draw.
  auto trace = make_trace({"week", "intercept", "treatment"}, 1, 200, [](std::size_t, std::size_t d, std::size_t p) {
    if (p == 0) return -0.5;
    if (p == 1) return 40.0 + 0.01 * static_cast<double>(d);
    return -2.0;
  });
  auto groups = group_mean_posteriors(trace, data, spec);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].group == "Placebo");
  CHECK(groups[2].group == "U10000");
  // Placebo rows: weeks 0, 4 -> mean week 2; U5000 weeks 0, 2, 8 -> 10/3; U10000 week 16.
  const std::array<double, 3> mean_week{2.0, 10.0 / 3.0, 16.0};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t d = 0; d < 200; ++d) {
      const double expected = 40.0 + 0.01 * static_cast<double>(d) - 2.0 * static_cast<double>(a) - 0.5 * mean_week[a];
      CHECK(groups[a].draws[0][d] == doctest::Approx(expected).epsilon(1e-12));
    }

  // Standardized: all six rows (mean week 5) with the arm switched.
  auto std_groups = group_mean_posteriors(trace, data, spec, GroupMeanMode::Standardized);
  for (std::size_t a = 0; a < 3; ++a)
    CHECK(std_groups[a].draws[0][0] == doctest::Approx(40.0 - 2.0 * static_cast<double>(a) - 0.5 * 5.0));
}

TEST_CASE("single-arm data gives one group and no contrasts") {
  auto data = PanelDataset::from_records({rec("a", 0, Arm::U5000), rec("b", 0, Arm::U5000), rec("b", 2, Arm::U5000)});
  auto trace = make_trace({"intercept"}, 1, 150, [](std::size_t, std::size_t, std::size_t) { return 1.0; });
  auto groups = group_mean_posteriors(trace, data, CovariateSpec::intercept_only());
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].group == "U5000");
  CHECK(pairwise_contrasts(groups).empty());
}

TEST_CASE("group means need every design column in the trace") {
  auto trace = make_trace({"intercept", "week"}, 1, 150, [](std::size_t, std::size_t, std::size_t) { return 0.0; });
  try {
    group_mean_posteriors(trace, three_arm_panel(), CovariateSpec::final_model());
    FAIL("accepted a mismatched trace");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SpecMismatch);
  }
}

TEST_CASE("self contrast") {
  auto g = normal_group("A", 1, 3.0);
  auto c = contrast(g, g);
  CHECK(c.median == 0.0);
  CHECK(c.interval.lower == 0.0);
  CHECK(c.interval.upper == 0.0);
  CHECK(c.p_tie == 1.0);
  CHECK(c.contains_zero);

  // Independent draws of the same posterior: centred on zero, symmetric interval.
  auto h = normal_group("B", 2, 3.0);
  auto d = contrast(g, h);
  CHECK(std::abs(d.median) < 0.05);
  CHECK(std::abs(d.interval.lower + d.interval.upper) < 0.1);
  CHECK(d.interval.upper == doctest::Approx(1.96 * std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("constant shift contrast") {
  auto g = normal_group("A", 3, 0.0);
  GroupPosterior shifted = g;
  shifted.group = "B";
  const double delta = 1.75;
  for (auto& ch : shifted.draws)
    for (auto& v : ch) v += delta;
  auto c = contrast(shifted, g);
  CHECK(c.median == doctest::Approx(delta).epsilon(1e-12));
  CHECK(c.interval.width() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c.p_greater == 1.0);
  CHECK_FALSE(c.contains_zero);
}

TEST_CASE("contrast antisymmetry and probabilities") {
  auto a = normal_group("A", 4, 0.3);
  auto b = normal_group("B", 5, 0.0);
  auto ab = contrast(a, b);
  auto ba = contrast(b, a);
  CHECK(ab.median == doctest::Approx(-ba.median).epsilon(1e-12));
  CHECK(ab.interval.lower == doctest::Approx(-ba.interval.upper).epsilon(1e-12));
  CHECK(ab.interval.upper == doctest::Approx(-ba.interval.lower).epsilon(1e-12));
  CHECK(ab.p_less == ba.p_greater);
  CHECK(ab.p_less + ab.p_greater + ab.p_tie == doctest::Approx(1.0));
  CHECK(ab.p_less >= 0.0);
  CHECK(ab.p_less <= 1.0);
  // N(0.3, 2): P(diff < 0) = Phi(-0.3 / sqrt 2) = 0.416.
  CHECK(ab.p_less == doctest::Approx(0.416).epsilon(0.05));

  // Ties land in p_tie.
  GroupPosterior x{"X", {{1.0, 2.0, 3.0, 4.0}}};
  GroupPosterior y{"Y", {{1.0, 3.0, 3.0, 3.0}}};
  auto xy = contrast(x, y);
  CHECK(xy.p_tie == 0.5);
  CHECK(xy.p_less == 0.25);
  CHECK(xy.p_greater == 0.25);
}

TEST_CASE("contrasts pair draws within chains") {
  auto a = normal_group("A", 6, 0.0, 2, 100);
  auto b = normal_group("B", 7, 0.0, 3, 100);
  CHECK_THROWS_AS(contrast(a, b), Error);
  auto c = normal_group("C", 8, 0.0, 2, 99);
  CHECK_THROWS_AS(contrast(a, c), Error);
}

TEST_CASE("pairwise contrasts cover every later-minus-earlier pair") {
  std::vector<GroupPosterior> groups{normal_group("P", 9, 0.0), normal_group("L", 10, 1.0),
                                     normal_group("H", 11, 2.0)};
  auto cs = pairwise_contrasts(groups);
  REQUIRE(cs.size() == 3);
  CHECK(cs[0].first == "L");
  CHECK(cs[0].second == "P");
  CHECK(cs[1].first == "H");
  CHECK(cs[1].second == "P");
  CHECK(cs[2].first == "H");
  CHECK(cs[2].second == "L");
  CHECK(cs[1].median == doctest::Approx(2.0).epsilon(0.05));
}
